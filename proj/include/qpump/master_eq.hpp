#pragma once

#include <vector>

#include "qpump/types.hpp"

namespace qpump {

// Probability distribution over the quasiparticle number n = 0 .. n_max.
struct NumberDistribution {
    std::vector<double> probs;
    double time_us = 0;

    static NumberDistribution delta(int n, int n_max);
    double mean() const;
    double total() const;
};

// Integrates the birth-death master equation
//   dP(n)/dt = gin P(n-1) - gin P(n) - n gout P(n) + (n+1) gout P(n+1)
// with a reflecting boundary at n_max (the gin flux out of n_max is dropped
// and reported through leak_out). Fixed-step classical RK4; the step is capped
// at 0.1/(n_max*gout + gin) and halved further if probability conservation
// degrades beyond 1e-9.
NumberDistribution evolve(const NumberDistribution& p0, double gamma_in, double gamma_out,
                          double t_us, double dt_max_us = 1e30, double* leak_out = nullptr);

// Ensemble decay for an arbitrary number distribution:
//   sum_n P(n) exp(-n t / t1qp) * exp(-t / t1r)
double decay_oracle(const NumberDistribution& dist, const DecayParams& p, double t_us);

// Total variation distance between two distributions (padded with zeros).
double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qpump
