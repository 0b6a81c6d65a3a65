#include "qpump/validation.hpp"

#include <cmath>
#include <sstream>

#include "qpump/analytic.hpp"
#include "qpump/master_eq.hpp"
#include "qpump/montecarlo.hpp"
#include "qpump/rng.hpp"
#include "qpump/special.hpp"

namespace qpump {

double bessel_k0_quadrature(double x) {
    const double h = 0.125;
    double sum = 0.5 * std::exp(-x);  // t = 0 term carries weight 1/2
    for (int k = 1; k < 4000; ++k) {
        const double term = std::exp(-x * std::cosh(k * h));
        sum += term;
        if (term < 1e-22 * sum) break;
    }
    return sum * h;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace

CheckResult check_mixture_identity(int n_random_sets, int n_time_points, double tol) {
    CheckResult res{"mixture-identity", false, ""};
    Philox4x32 rng(0x9d2c5680, 0, 0);
    double worst = 0;
    for (int set = 0; set <= n_random_sets; ++set) {
        // Set 0 pins the device-A fit values; the rest scan the parameter box.
        DecayParams p = set == 0 ? DecayParams{2.5, 23.0, 55.0}
                                 : DecayParams{10.0 * rng.uniform(), 1.0 + 99.0 * rng.uniform(),
                                               1.0 + 99.0 * rng.uniform()};
        const auto steady = poisson_steady(p.n_avg, 1.0, 200);
        for (int i = 0; i < n_time_points; ++i) {
            const double t = 10.0 * p.t1r_us * i / (n_time_points - 1);
            const double direct = decay_population(t, p);
            double mixture = 0;
            const double per_qp = std::exp(-t / p.t1qp_us);
            double weight = 1.0;
            for (std::size_t n = 0; n < steady.probs.size(); ++n) {
                mixture += steady.probs[n] * weight;
                weight *= per_qp;
            }
            mixture *= std::exp(-t / p.t1r_us);
            worst = std::max(worst, std::fabs(mixture - direct));
        }
    }
    res.pass = worst < tol;
    res.detail = "max |mixture - closed form| = " + fmt(worst) + " (tol " + fmt(tol) + ")";
    return res;
}

CheckResult check_master_equation(int n_rate_pairs) {
    CheckResult res{"master-equation-steady-state", false, ""};
    Philox4x32 rng(0x9e3779b9, 1, 0);
    double worst_tv = 0, worst_mean = 0;
    for (int k = 0; k < n_rate_pairs; ++k) {
        const double gamma_out = 0.01 + 0.99 * rng.uniform();
        const double mean_target = 0.5 + 7.5 * rng.uniform();
        const double gamma_in = mean_target * gamma_out;
        const int n_max =
            static_cast<int>(mean_target + 12.0 * std::sqrt(mean_target) + 30.0);

        auto dist = NumberDistribution::delta(0, n_max);
        const double horizon = 20.0 / gamma_out;
        const int mean_checks = 10;
        double t = 0;
        for (int s = 1; s <= mean_checks; ++s) {
            const double t_next = horizon * s / mean_checks;
            dist = evolve(dist, gamma_in, gamma_out, t_next - t);
            t = t_next;
            const double expected = mean_nqp(t, 0.0, gamma_in, gamma_out);
            worst_mean = std::max(worst_mean, std::fabs(dist.mean() - expected));
        }
        const auto steady = poisson_steady(gamma_in, gamma_out, n_max);
        worst_tv = std::max(worst_tv, total_variation(dist.probs, steady.probs));
    }
    res.pass = worst_tv < 1e-6 && worst_mean < 1e-7;
    res.detail = "max TV = " + fmt(worst_tv) + " (tol 1e-6), max mean error = " + fmt(worst_mean) +
                 " (tol 1e-7)";
    return res;
}

CheckResult check_mc_vs_analytic(long n_trials, double se_factor) {
    CheckResult res{"monte-carlo-vs-analytic", false, ""};
    BathParams bath;
    bath.energy_resolved = false;
    DecayParams decay{0.0, 23.0, 55.0};
    DeviceParams device;
    const Engine engine(bath, decay, device);

    PulseSequence seq;
    seq.n_pulses = 0;
    seq.probe_delay_us = 0;
    seq.readout_grid_us.clear();
    for (int i = 0; i < 30; ++i) seq.readout_grid_us.push_back(150.0 * i / 29.0);
    seq.repetition_period_us = 2000;

    const auto result = engine.run_protocol(seq, n_trials, 20240517);
    const DecayParams expected{bath.gamma_in / bath.gamma_out, decay.t1qp_us, decay.t1r_us};
    double worst_pull = 0;
    for (std::size_t j = 0; j < seq.readout_grid_us.size(); ++j) {
        const double pa = decay_population(seq.readout_grid_us[j], expected);
        const double se = std::sqrt(pa * (1.0 - pa) / static_cast<double>(result.valid_trials));
        const double diff = std::fabs(result.trace.populations[j] - pa);
        if (se == 0) {
            if (diff > 0) worst_pull = std::max(worst_pull, 1e30);
        } else {
            worst_pull = std::max(worst_pull, diff / se);
        }
    }
    res.pass = worst_pull < se_factor;
    res.detail = "max pull = " + fmt(worst_pull) + " SE (tol " + fmt(se_factor) + " SE, " +
                 std::to_string(n_trials) + " trials)";
    return res;
}

CheckResult check_k0_accuracy(std::function<double(double)> k0, int n_points, double tol) {
    CheckResult res{"bessel-k0-accuracy", false, ""};
    if (!k0) k0 = [](double x) { return bessel_k0(x); };
    Philox4x32 rng(0x7f4a7c15, 2, 0);
    double worst = 0;
    for (int i = 0; i < n_points; ++i) {
        // Half log-spaced sweep, half random points in [0.05, 30].
        double x;
        if (i < n_points / 2) {
            const double frac = static_cast<double>(i) / std::max(1, n_points / 2 - 1);
            x = 0.05 * std::pow(30.0 / 0.05, frac);
        } else {
            x = 0.05 + (30.0 - 0.05) * rng.uniform();
        }
        const double ref = bessel_k0_quadrature(x);
        worst = std::max(worst, std::fabs(k0(x) / ref - 1.0));
    }
    res.pass = worst < tol;
    res.detail = "max relative error = " + fmt(worst) + " (tol " + fmt(tol) + ")";
    return res;
}

std::vector<CheckResult> run_validation_suite(bool quick) {
    std::vector<CheckResult> out;
    out.push_back(check_mixture_identity());
    out.push_back(check_master_equation());
    out.push_back(check_mc_vs_analytic(quick ? 10000 : 100000, quick ? 5.0 : 3.0));
    out.push_back(check_k0_accuracy());
    return out;
}

}  // namespace qpump
