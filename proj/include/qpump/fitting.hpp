#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qpump/types.hpp"

namespace qpump {

struct ParamBounds {
    double lo = 0;
    double hi = 0;
};

struct FitOptions {
    std::optional<double> fix_t1r_us;      // pin t1r and fit only (n_avg, t1qp)
    std::optional<double> fix_n_avg;       // pin n_avg (the flux-sweep extraction pins 1.5)
    std::optional<DecayParams> init;       // otherwise a closed-form heuristic is used
    ParamBounds n_avg_bounds{0.0, 20.0};
    ParamBounds t1qp_bounds{0.1, 1e3};
    ParamBounds t1r_bounds{0.1, 1e4};
    int max_iter = 200;
    double tol = 1e-12;  // relative objective tolerance
};

// Parameter order in covariance/stderr slots: [n_avg, t1qp, t1r].
// When t1r is pinned its row, column and stderr slot are zero.
struct FitResult {
    DecayParams params;
    std::array<std::array<double, 3>, 3> covariance{};
    std::array<double, 3> param_stderr{};
    double residual_norm = 0;  // weighted RMS residual
    int n_iter = 0;
    bool converged = false;
    std::vector<double> objective_history;  // accepted chi^2 values, non-increasing
};

// Weighted nonlinear least squares of the quasiparticle decay law against a
// trace. Weights are 1/max(stderr, 1e-3)^2 when the trace carries standard
// errors, uniform otherwise.
FitResult fit_decay(const DecayTrace& trace, const FitOptions& opts = {});

struct ExponentialFit {
    double t1_us = 0;
    double amplitude = 0;
    double offset = 0;
    double residual_norm = 0;
    int n_iter = 0;
    bool converged = false;
};

// Plain a*exp(-t/t1) + c fit, as used for the temperature sweep.
ExponentialFit fit_exponential(const DecayTrace& trace);

struct RecoveryFit {
    double gamma_out = 0;  // 1/us; recovery time constant is 1/gamma_out
    double n_steady = 0;
    double n0 = 0;
    double residual_norm = 0;
    int n_iter = 0;
    bool converged = false;
};

// Fits n(t) = n0 exp(-g t) + ns (1 - exp(-g t)) to a recovery series.
// A constant series leaves gamma_out unidentifiable and is flagged
// non-converged rather than rejected.
RecoveryFit fit_recovery(std::span<const double> t_delay_us, std::span<const double> n_avg);

struct BootstrapResult {
    std::array<double, 3> param_stddev{};  // [n_avg, t1qp, t1r]
    int n_failed = 0;
};

// Residual-resampling bootstrap around a converged fit. Deterministic for a
// fixed seed. Throws if more than 20% of resamples fail to fit.
BootstrapResult bootstrap(const DecayTrace& trace, const FitOptions& opts, int n_resamples,
                          std::uint64_t seed);

}  // namespace qpump
