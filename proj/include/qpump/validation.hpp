#pragma once

#include <functional>
#include <string>
#include <vector>

namespace qpump {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Independent K0 reference: trapezoidal quadrature of the integral
// representation K0(x) = int_0^inf exp(-x cosh t) dt. Slow but accurate to
// ~1e-14 relative; shares no code with the series implementation it checks.
double bessel_k0_quadrature(double x);

// Poisson-weighted exponential mixture versus the closed-form decay law.
CheckResult check_mixture_identity(int n_random_sets = 20, int n_time_points = 1000,
                                   double tol = 1e-12);

// Master-equation convergence to the Poisson steady state plus the
// closed-form mean trajectory.
CheckResult check_master_equation(int n_rate_pairs = 10);

// Monte Carlo single-pulse decay against the analytic law, energy
// resolution off.
CheckResult check_mc_vs_analytic(long n_trials = 100000, double se_factor = 3.0);

// K0 against the quadrature reference on [0.05, 30]. An alternative
// implementation can be injected (mutation testing).
CheckResult check_k0_accuracy(std::function<double(double)> k0 = {}, int n_points = 100,
                              double tol = 1e-10);

// The cross-module suite behind `qpump validate`. `quick` cuts trial counts
// tenfold and loosens the Monte Carlo criterion to 5 SE.
std::vector<CheckResult> run_validation_suite(bool quick = false);

}  // namespace qpump
