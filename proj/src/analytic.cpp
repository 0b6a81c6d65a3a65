#include "qpump/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpump/constants.hpp"
#include "qpump/special.hpp"

namespace qpump {

double decay_population(double t_us, const DecayParams& p) {
    if (t_us < 0) throw std::domain_error("decay_population: t must be non-negative");
    return std::exp(p.n_avg * std::expm1(-t_us / p.t1qp_us)) * std::exp(-t_us / p.t1r_us);
}

double one_over_e_time(const DecayParams& p) {
    const double target = std::exp(-1.0);
    double lo = 0.0;
    double hi = 20.0 * std::max(p.t1qp_us, p.t1r_us);
    // p is continuous and strictly decreasing with p(0) = 1 and p(hi) <= e^-20.
    for (int iter = 0; iter < 200 && hi - lo > 1e-6; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (decay_population(mid, p) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

PoissonSteady poisson_steady(double gamma_in, double gamma_out, int n_max) {
    if (!(gamma_out > 0))
        throw std::domain_error("poisson_steady: gamma_out must be positive (no steady state)");
    if (gamma_in < 0) throw std::domain_error("poisson_steady: gamma_in must be non-negative");
    if (n_max < 0) throw std::domain_error("poisson_steady: n_max must be non-negative");

    PoissonSteady out;
    out.mean = gamma_in / gamma_out;
    out.probs.resize(static_cast<std::size_t>(n_max) + 1);
    double term = std::exp(-out.mean);  // P(0)
    double sum = 0;
    for (int n = 0; n <= n_max; ++n) {
        out.probs[n] = term;
        sum += term;
        term *= out.mean / (n + 1);
    }
    out.tail_mass = std::max(0.0, 1.0 - sum);
    for (double& q : out.probs) q /= sum;
    return out;
}

double mean_nqp(double t_us, double n0, double gamma_in, double gamma_out) {
    if (t_us < 0) throw std::domain_error("mean_nqp: t must be non-negative");
    const double decay = std::exp(-gamma_out * t_us);
    return n0 * decay + (gamma_in / gamma_out) * (1.0 - decay);
}

double thermal_rate_log(double temp_k, const DeviceParams& device, double omega_ghz) {
    if (!(temp_k > 0)) throw std::domain_error("thermal_rate: temperature must be positive");
    const double kt_ghz = Constants::kb_over_h_ghz_per_k * temp_k;
    const double x = omega_ghz / (2.0 * kt_ghz);
    // 1/T1th = 32e3 EJ ME^2 * e^{-gap/kT} * [e^x K0(x)] * (1 + e^{-2x})
    return std::log(32e3 * device.ej_large_ghz * device.me_large * device.me_large)
           - device.gap_ghz / kt_ghz + std::log(bessel_k0_scaled(x)) + std::log1p(std::exp(-2.0 * x));
}

double thermal_rate(double temp_k, const DeviceParams& device, double omega_ghz) {
    return std::exp(thermal_rate_log(temp_k, device, omega_ghz));
}

double total_t1(double temp_k, const ThermalModel& model, double omega_ghz) {
    const double rate = thermal_rate(temp_k, model.device, omega_ghz);
    return 1.0 / (1.0 / model.t1ne_us + rate);
}

double qubit_freq(double f, const DeviceParams& device) {
    return std::hypot(device.omega0_ghz, device.eps_slope_ghz * f);
}

FluxPoint t1qp_flux(double f, double t1qp0_us, const DeviceParams& device) {
    if (!(t1qp0_us > 0)) throw std::domain_error("t1qp_flux: t1qp0 must be positive");
    FluxPoint pt;
    pt.f = f;
    pt.omega_ghz = qubit_freq(f, device);
    const double me_s = device.me_small_table.eval(f, &pt.clamped);
    const double bracket = 1.0 + device.alpha * me_s * me_s / (device.me_large * device.me_large);
    const double inv_t1qp =
        (1.0 / t1qp0_us) * std::sqrt(device.omega0_ghz / pt.omega_ghz) * bracket;
    pt.t1qp_us = 1.0 / inv_t1qp;
    return pt;
}

double energy_estimate(double n_before, double n_after, double gap_ghz) {
    if (!(n_after > 0)) throw std::domain_error("energy_estimate: n_after must be positive");
    if (n_before < n_after)
        throw std::domain_error("energy_estimate: n_before must be >= n_after");
    const double ratio = n_before / n_after;
    return gap_ghz / (2.0 * ratio * ratio);
}

double xqp_upper_bound(double n_avg, double n_cooper_pairs) {
    if (!(n_cooper_pairs > 0))
        throw std::domain_error("xqp_upper_bound: pair number must be positive");
    return n_avg / n_cooper_pairs;
}

}  // namespace qpump
