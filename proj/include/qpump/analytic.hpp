#pragma once

#include <vector>

#include "qpump/types.hpp"

namespace qpump {

// Excited-state survival probability under quasiparticle-number fluctuations:
//   p(t) = exp(n_avg * (exp(-t/t1qp) - 1)) * exp(-t/t1r)
// The Poisson mixture of per-number exponentials collapses to this closed form.
double decay_population(double t_us, const DecayParams& p);

// Time at which decay_population falls to 1/e, by bisection to 1e-6 us.
double one_over_e_time(const DecayParams& p);

struct PoissonSteady {
    std::vector<double> probs;  // n = 0 .. n_max, renormalized over the truncation
    double mean = 0;            // gamma_in / gamma_out
    double tail_mass = 0;       // probability mass beyond n_max before renormalization
};

PoissonSteady poisson_steady(double gamma_in, double gamma_out, int n_max = 200);

// Mean quasiparticle number relaxing from n0 toward gamma_in/gamma_out:
//   n(t) = n0 * exp(-gamma_out t) + (gamma_in/gamma_out) * (1 - exp(-gamma_out t))
double mean_nqp(double t_us, double n0, double gamma_in, double gamma_out);

// Relaxation rate from thermal quasiparticles, 1/us.
// Under the E/h-in-GHz convention the prefactor 16 EJ/(pi hbar) becomes
// 32e3 * EJ[GHz] per us.
double thermal_rate(double temp_k, const DeviceParams& device, double omega_ghz);

// log(thermal_rate); usable below ~30 mK where the rate itself underflows.
double thermal_rate_log(double temp_k, const DeviceParams& device, double omega_ghz);

struct ThermalModel {
    double t1ne_us = 55.0;  // temperature-independent residual T1
    DeviceParams device;
};

// 1/T1 = 1/t1ne + thermal_rate.
double total_t1(double temp_k, const ThermalModel& model, double omega_ghz);

// Flux-qubit frequency: omega(f) = sqrt(omega0^2 + (eps_slope * f)^2), GHz.
double qubit_freq(double f, const DeviceParams& device);

struct FluxPoint {
    double f = 0;
    double omega_ghz = 0;
    double t1qp_us = 0;
    bool clamped = false;  // f outside the matrix-element table
};

// Single-quasiparticle relaxation time versus flux bias:
//   1/t1qp(f) = 1/t1qp(0) * sqrt(omega0/omega(f)) * (1 + alpha * ME_s(f)^2 / ME_L^2)
FluxPoint t1qp_flux(double f, double t1qp0_us, const DeviceParams& device);

// Characteristic quasiparticle energy from the pump-induced population drop:
//   deltaE = gap / (2 * (n_before/n_after)^2)
double energy_estimate(double n_before, double n_after, double gap_ghz);

// Quasiparticles per Cooper pair, assuming all are confined to the islands.
double xqp_upper_bound(double n_avg, double n_cooper_pairs);

}  // namespace qpump
