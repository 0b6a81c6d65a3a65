#include "qpump/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qpump/analytic.hpp"
#include "qpump/rng.hpp"

namespace qpump {

namespace {

constexpr double kStderrFloor = 1e-3;

using Model = std::function<double(double, const double*)>;

struct LsqData {
    std::span<const double> x;
    std::span<const double> y;
    std::vector<double> w;
};

double chi2(const Model& m, const LsqData& d, const double* p) {
    double s = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double r = m(d.x[i], p) - d.y[i];
        s += d.w[i] * r * r;
    }
    return s;
}

// Solves A x = b in place for k <= 3; returns false when A is singular.
bool solve_small(std::vector<std::vector<double>>& a, std::vector<double>& b) {
    const std::size_t k = b.size();
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < k; ++r) {
            const double fac = a[r][col] / a[col][col];
            for (std::size_t c = col; c < k; ++c) a[r][c] -= fac * a[col][c];
            b[r] -= fac * b[col];
        }
    }
    for (std::size_t col = k; col-- > 0;) {
        for (std::size_t c = col + 1; c < k; ++c) b[col] -= a[col][c] * b[c];
        b[col] /= a[col][col];
    }
    return true;
}

bool invert_small(std::vector<std::vector<double>> a, std::vector<std::vector<double>>& inv) {
    const std::size_t k = a.size();
    inv.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t c = 0; c < k; ++c) inv[c][c] = 1.0;
    // Gauss-Jordan with partial pivoting.
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        const double d = a[col][col];
        for (std::size_t c = 0; c < k; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double fac = a[r][col];
            if (fac == 0) continue;
            for (std::size_t c = 0; c < k; ++c) {
                a[r][c] -= fac * a[col][c];
                inv[r][c] -= fac * inv[col][c];
            }
        }
    }
    return true;
}

void clamp_params(std::vector<double>& p, std::span<const ParamBounds> bounds) {
    for (std::size_t j = 0; j < p.size(); ++j)
        p[j] = std::clamp(p[j], bounds[j].lo, bounds[j].hi);
}

void jacobian(const Model& m, const LsqData& d, const std::vector<double>& p,
              std::vector<std::vector<double>>& jac) {
    const std::size_t n = d.x.size(), k = p.size();
    jac.assign(n, std::vector<double>(k));
    std::vector<double> ph(p), pl(p);
    for (std::size_t j = 0; j < k; ++j) {
        const double h = std::max(1e-6 * std::fabs(p[j]), 1e-9);
        ph = p;
        pl = p;
        ph[j] += h;
        pl[j] -= h;
        for (std::size_t i = 0; i < n; ++i)
            jac[i][j] = (m(d.x[i], ph.data()) - m(d.x[i], pl.data())) / (2.0 * h);
    }
}

// Bounded Nelder-Mead used as a restart when the damped-least-squares loop
// stalls far from a minimum.
void simplex_restart(const Model& m, const LsqData& d, std::vector<double>& p,
                     std::span<const ParamBounds> bounds) {
    const std::size_t k = p.size();
    std::vector<std::vector<double>> pts(k + 1, p);
    for (std::size_t j = 0; j < k; ++j) {
        pts[j + 1][j] += 0.1 * std::fabs(p[j]) + 0.01;
        clamp_params(pts[j + 1], bounds);
    }
    std::vector<double> f(k + 1);
    for (std::size_t i = 0; i <= k; ++i) f[i] = chi2(m, d, pts[i].data());

    auto order = [&] {
        std::vector<std::size_t> idx(k + 1);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        std::vector<std::vector<double>> np(k + 1);
        std::vector<double> nf(k + 1);
        for (std::size_t i = 0; i <= k; ++i) {
            np[i] = pts[idx[i]];
            nf[i] = f[idx[i]];
        }
        pts = np;
        f = nf;
    };

    for (int it = 0; it < 200 * static_cast<int>(k); ++it) {
        order();
        if (f[k] - f[0] < 1e-14 * (std::fabs(f[0]) + 1e-300)) break;
        std::vector<double> centroid(k, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) centroid[j] += pts[i][j] / static_cast<double>(k);
        auto mix = [&](double coeff) {
            std::vector<double> q(k);
            for (std::size_t j = 0; j < k; ++j)
                q[j] = centroid[j] + coeff * (pts[k][j] - centroid[j]);
            clamp_params(q, bounds);
            return q;
        };
        auto refl = mix(-1.0);
        const double fr = chi2(m, d, refl.data());
        if (fr < f[0]) {
            auto exp_pt = mix(-2.0);
            const double fe = chi2(m, d, exp_pt.data());
            if (fe < fr) { pts[k] = exp_pt; f[k] = fe; }
            else { pts[k] = refl; f[k] = fr; }
        } else if (fr < f[k - 1]) {
            pts[k] = refl;
            f[k] = fr;
        } else {
            auto con = mix(0.5);
            const double fc = chi2(m, d, con.data());
            if (fc < f[k]) { pts[k] = con; f[k] = fc; }
            else {
                for (std::size_t i = 1; i <= k; ++i) {
                    for (std::size_t j = 0; j < k; ++j)
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    f[i] = chi2(m, d, pts[i].data());
                }
            }
        }
    }
    order();
    p = pts[0];
}

struct LsqOut {
    std::vector<double> p;
    std::vector<std::vector<double>> covariance;
    std::vector<double> history;  // accepted objective values
    double chi2 = 0;
    double weight_sum = 0;
    int n_iter = 0;
    bool converged = false;
};

LsqOut damped_lsq(const Model& m, const LsqData& d, std::vector<double> p,
                  std::span<const ParamBounds> bounds, int max_iter, double tol,
                  bool absolute_weights) {
    const std::size_t k = p.size();
    clamp_params(p, bounds);
    LsqOut out;
    out.weight_sum = std::accumulate(d.w.begin(), d.w.end(), 0.0);

    double f = chi2(m, d, p.data());
    out.history.push_back(f);
    double lambda = 1.0;  // conservative start; decays quickly on accepted steps
    int rejects = 0;
    bool restarted = false;
    std::vector<std::vector<double>> jac;

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        jacobian(m, d, p, jac);
        std::vector<std::vector<double>> jtj(k, std::vector<double>(k, 0.0));
        std::vector<double> jtr(k, 0.0);
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            const double r = d.y[i] - m(d.x[i], p.data());
            for (std::size_t a = 0; a < k; ++a) {
                jtr[a] += d.w[i] * jac[i][a] * r;
                for (std::size_t b = a; b < k; ++b) jtj[a][b] += d.w[i] * jac[i][a] * jac[i][b];
            }
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];

        auto damped = jtj;
        for (std::size_t a = 0; a < k; ++a)
            damped[a][a] += lambda * std::max(jtj[a][a], 1e-30);
        auto delta = jtr;
        if (!solve_small(damped, delta)) {
            lambda *= 10;
            continue;
        }
        std::vector<double> trial(k);
        for (std::size_t a = 0; a < k; ++a) trial[a] = p[a] + delta[a];
        clamp_params(trial, bounds);
        const double ft = chi2(m, d, trial.data());
        if (ft < f) {
            const double rel = (f - ft) / std::max(f, 1e-300);
            p = trial;
            f = ft;
            out.history.push_back(f);
            lambda = std::max(lambda * 0.1, 1e-14);
            rejects = 0;
            if (rel < tol) {
                out.converged = true;
                ++iter;
                break;
            }
        } else {
            lambda *= 10;
            ++rejects;
            if (rejects >= 15) {
                if (restarted) break;
                simplex_restart(m, d, p, bounds);
                const double fs = chi2(m, d, p.data());
                if (fs < f) out.history.push_back(fs);
                f = std::min(f, fs);
                lambda = 1e-3;
                rejects = 0;
                restarted = true;
            }
        }
        if (f <= 1e-300) {  // exact data
            out.converged = true;
            ++iter;
            break;
        }
    }

    out.p = p;
    out.chi2 = f;
    out.n_iter = iter;

    // Covariance from the undamped normal matrix at the solution.
    jacobian(m, d, p, jac);
    std::vector<std::vector<double>> jtj(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < d.x.size(); ++i)
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) jtj[a][b] += d.w[i] * jac[i][a] * jac[i][b];
    if (!invert_small(jtj, out.covariance))
        out.covariance.assign(k, std::vector<double>(k, 0.0));
    if (!absolute_weights) {
        const double dof = std::max<double>(1.0, static_cast<double>(d.x.size()) - static_cast<double>(k));
        const double s2 = f / dof;
        for (auto& row : out.covariance)
            for (double& v : row) v *= s2;
    }
    return out;
}

std::vector<double> make_weights(const DecayTrace& trace) {
    std::vector<double> w(trace.delays_us.size(), 1.0);
    if (!trace.stderrs.empty())
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double s = std::max(trace.stderrs[i], kStderrFloor);
            w[i] = 1.0 / (s * s);
        }
    return w;
}

void require_not_constant(std::span<const double> y, const char* what) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo < 1e-14) throw std::invalid_argument(std::string(what) + ": constant data");
}

// Closed-form starting point: the tail of log p is linear with slope -1/t1r
// and intercept -n_avg; the initial log-slope adds -n_avg/t1qp.
DecayParams initial_guess(const DecayTrace& trace, const FitOptions& opts) {
    if (opts.init) return *opts.init;
    const auto& t = trace.delays_us;
    const auto& y = trace.populations;
    const std::size_t n = t.size();
    const std::size_t m = std::max<std::size_t>(2, n / 5);

    auto loglin = [&](std::size_t first, std::size_t last, double& slope, double& intercept) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t i = first; i < last; ++i) {
            if (y[i] <= 0) continue;
            const double ly = std::log(y[i]);
            sx += t[i];
            sy += ly;
            sxx += t[i] * t[i];
            sxy += t[i] * ly;
            ++cnt;
        }
        if (cnt < 2) { slope = 0; intercept = 0; return false; }
        const double det = cnt * sxx - sx * sx;
        if (std::fabs(det) < 1e-300) { slope = 0; intercept = 0; return false; }
        slope = (cnt * sxy - sx * sy) / det;
        intercept = (sy * sxx - sx * sxy) / det;
        return true;
    };

    DecayParams g;
    double slope_tail = 0, icpt_tail = 0;
    const bool tail_ok = loglin(n - m, n, slope_tail, icpt_tail);
    g.t1r_us = (tail_ok && slope_tail < -1e-12) ? -1.0 / slope_tail : t.back();
    if (opts.fix_t1r_us) g.t1r_us = *opts.fix_t1r_us;
    g.n_avg = tail_ok ? -icpt_tail : 1.0;

    double slope_head = 0, icpt_head = 0;
    if (loglin(0, m, slope_head, icpt_head) && g.n_avg > 1e-6) {
        const double qp_rate = -slope_head - 1.0 / g.t1r_us;
        g.t1qp_us = qp_rate > 1e-9 ? g.n_avg / qp_rate : g.t1r_us / 3.0;
    } else {
        g.t1qp_us = g.t1r_us / 3.0;
    }

    g.n_avg = std::clamp(g.n_avg, opts.n_avg_bounds.lo, opts.n_avg_bounds.hi);
    g.t1qp_us = std::clamp(g.t1qp_us, opts.t1qp_bounds.lo, opts.t1qp_bounds.hi);
    g.t1r_us = std::clamp(g.t1r_us, opts.t1r_bounds.lo, opts.t1r_bounds.hi);
    return g;
}

}  // namespace

FitResult fit_decay(const DecayTrace& trace, const FitOptions& opts) {
    validate(trace, "trace");
    if (trace.delays_us.size() < 6)
        throw std::invalid_argument("fit_decay: need at least 6 points");
    for (double p : trace.populations)
        if (!(p > 0 && p <= 1))
            throw std::invalid_argument("fit_decay: populations must lie in (0,1]");
    require_not_constant(trace.populations, "fit_decay");

    DecayParams guess = initial_guess(trace, opts);
    if (opts.fix_n_avg) guess.n_avg = *opts.fix_n_avg;
    if (opts.fix_t1r_us) guess.t1r_us = *opts.fix_t1r_us;

    // Active-parameter indexing: slot 0 = n_avg, 1 = t1qp, 2 = t1r.
    std::vector<int> active;
    if (!opts.fix_n_avg) active.push_back(0);
    active.push_back(1);
    if (!opts.fix_t1r_us) active.push_back(2);

    const std::array<double, 3> full0{guess.n_avg, guess.t1qp_us, guess.t1r_us};
    const std::array<ParamBounds, 3> full_bounds{opts.n_avg_bounds, opts.t1qp_bounds,
                                                 opts.t1r_bounds};
    Model model = [&full0, &active](double t, const double* q) {
        std::array<double, 3> p = full0;
        for (std::size_t a = 0; a < active.size(); ++a) p[active[a]] = q[a];
        return decay_population(t, DecayParams{p[0], p[1], p[2]});
    };
    std::vector<double> p0;
    std::vector<ParamBounds> bounds;
    for (int slot : active) {
        p0.push_back(full0[slot]);
        bounds.push_back(full_bounds[slot]);
    }

    LsqData data{trace.delays_us, trace.populations, make_weights(trace)};
    auto lsq = damped_lsq(model, data, p0, bounds, opts.max_iter, opts.tol,
                          !trace.stderrs.empty());

    // A parameter parked on its bound with a poor residual marks a local
    // basin; retry from a deterministic ladder of t1qp scales and keep the
    // best optimum.
    auto at_bound = [&](const LsqOut& r) {
        for (std::size_t a = 0; a < r.p.size(); ++a)
            if (r.p[a] <= bounds[a].lo + 1e-12 || r.p[a] >= bounds[a].hi - 1e-12) return true;
        return false;
    };
    if (at_bound(lsq) && lsq.chi2 > 1e-12 * lsq.weight_sum) {
        const int t1qp_slot = opts.fix_n_avg ? 0 : 1;
        for (double scale : {0.05, 0.15, 0.4, 1.0}) {
            auto alt0 = p0;
            alt0[t1qp_slot] = std::clamp(guess.t1r_us * scale, opts.t1qp_bounds.lo,
                                         opts.t1qp_bounds.hi);
            auto alt = damped_lsq(model, data, alt0, bounds, opts.max_iter, opts.tol,
                                  !trace.stderrs.empty());
            if (alt.chi2 < lsq.chi2) lsq = std::move(alt);
        }
    }

    FitResult res;
    std::array<double, 3> final_p = full0;
    for (std::size_t a = 0; a < active.size(); ++a) final_p[active[a]] = lsq.p[a];
    res.params = DecayParams{final_p[0], final_p[1], final_p[2]};
    res.residual_norm = std::sqrt(lsq.chi2 / lsq.weight_sum);
    res.n_iter = lsq.n_iter;
    res.converged = lsq.converged;
    res.objective_history = lsq.history;
    for (std::size_t a = 0; a < active.size(); ++a) {
        for (std::size_t b = 0; b < active.size(); ++b)
            res.covariance[active[a]][active[b]] = lsq.covariance[a][b];
        res.param_stderr[active[a]] = std::sqrt(std::max(0.0, lsq.covariance[a][a]));
    }
    return res;
}

ExponentialFit fit_exponential(const DecayTrace& trace) {
    validate(trace, "trace");
    if (trace.delays_us.size() < 4)
        throw std::invalid_argument("fit_exponential: need at least 4 points");
    require_not_constant(trace.populations, "fit_exponential");

    const auto& t = trace.delays_us;
    const auto& y = trace.populations;
    const double span = t.back() - t.front();
    double c0 = y.back();
    double a0 = y.front() - c0;
    if (std::fabs(a0) < 1e-12) a0 = (a0 < 0 ? -1.0 : 1.0) * 1e-3;
    double t10 = span > 0 ? span / 3.0 : 1.0;

    Model model = [](double x, const double* q) { return q[1] * std::exp(-x / q[0]) + q[2]; };
    std::vector<ParamBounds> bounds{{1e-3, 1e7}, {-10, 10}, {-1, 1}};
    LsqData data{t, y, make_weights(trace)};
    const auto lsq = damped_lsq(model, data, {t10, a0, c0}, bounds, 400, 1e-14,
                                !trace.stderrs.empty());

    ExponentialFit res;
    res.t1_us = lsq.p[0];
    res.amplitude = lsq.p[1];
    res.offset = lsq.p[2];
    res.residual_norm = std::sqrt(lsq.chi2 / lsq.weight_sum);
    res.n_iter = lsq.n_iter;
    res.converged = lsq.converged;
    return res;
}

RecoveryFit fit_recovery(std::span<const double> t_delay_us, std::span<const double> n_avg) {
    if (t_delay_us.size() != n_avg.size())
        throw std::invalid_argument("fit_recovery: length mismatch");
    if (t_delay_us.size() < 4)
        throw std::invalid_argument("fit_recovery: need at least 4 pairs");

    const auto [lo, hi] = std::minmax_element(n_avg.begin(), n_avg.end());
    RecoveryFit res;
    if (*hi - *lo < 1e-12 * (std::fabs(*hi) + 1.0)) {
        // Constant series: gamma_out is unidentifiable.
        res.n_steady = res.n0 = 0.5 * (*hi + *lo);
        res.converged = false;
        return res;
    }

    const std::size_t n = n_avg.size();
    const std::size_t m = std::max<std::size_t>(2, n / 5);
    double ns0 = 0;
    for (std::size_t i = n - m; i < n; ++i) ns0 += n_avg[i];
    ns0 /= static_cast<double>(m);
    const double n00 = n_avg.front();
    const double span = t_delay_us.back() - t_delay_us.front();
    double g0 = span > 0 ? 3.0 / span : 1.0;
    // Crossing time of 1/e of the initial gap gives a better rate scale.
    const double gap0 = std::fabs(n00 - ns0);
    for (std::size_t i = 1; i < n; ++i) {
        if (std::fabs(n_avg[i] - ns0) < gap0 * 0.3679 && t_delay_us[i] > 0) {
            g0 = 1.0 / t_delay_us[i];
            break;
        }
    }

    Model model = [](double x, const double* q) {
        const double e = std::exp(-q[0] * x);
        return q[2] * e + q[1] * (1.0 - e);
    };
    std::vector<ParamBounds> bounds{{1e-8, 1e3}, {0, 100}, {0, 100}};
    std::vector<double> w(n, 1.0);
    LsqData data{t_delay_us, n_avg, std::move(w)};
    const auto lsq = damped_lsq(model, data, {g0, ns0, n00}, bounds, 400, 1e-14, false);

    res.gamma_out = lsq.p[0];
    res.n_steady = lsq.p[1];
    res.n0 = lsq.p[2];
    res.residual_norm = std::sqrt(lsq.chi2 / lsq.weight_sum);
    res.n_iter = lsq.n_iter;
    res.converged = lsq.converged;
    return res;
}

BootstrapResult bootstrap(const DecayTrace& trace, const FitOptions& opts, int n_resamples,
                          std::uint64_t seed) {
    if (n_resamples < 100)
        throw std::invalid_argument("bootstrap: need at least 100 resamples");
    const FitResult base = fit_decay(trace, opts);
    const std::size_t n = trace.delays_us.size();
    std::vector<double> fitted(n), resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        fitted[i] = decay_population(trace.delays_us[i], base.params);
        resid[i] = trace.populations[i] - fitted[i];
    }

    FitOptions opts_b = opts;
    opts_b.init = base.params;

    std::vector<std::array<double, 3>> samples;
    samples.reserve(n_resamples);
    int failed = 0;
    for (int b = 0; b < n_resamples; ++b) {
        Philox4x32 rng(seed, static_cast<std::uint64_t>(b), 0);
        DecayTrace rt = trace;
        for (std::size_t i = 0; i < n; ++i) {
            const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
            rt.populations[i] = std::clamp(fitted[i] + resid[pick], 1e-9, 1.0);
        }
        try {
            const FitResult fr = fit_decay(rt, opts_b);
            if (!fr.converged) { ++failed; continue; }
            samples.push_back({fr.params.n_avg, fr.params.t1qp_us, fr.params.t1r_us});
        } catch (const std::exception&) {
            ++failed;
        }
    }
    if (failed > n_resamples / 5)
        throw std::runtime_error("bootstrap: more than 20% of resamples failed to fit");

    BootstrapResult out;
    out.n_failed = failed;
    const double cnt = static_cast<double>(samples.size());
    for (int j = 0; j < 3; ++j) {
        double mean = 0;
        for (const auto& s : samples) mean += s[j];
        mean /= cnt;
        double var = 0;
        for (const auto& s : samples) var += (s[j] - mean) * (s[j] - mean);
        out.param_stddev[j] = std::sqrt(var / std::max(1.0, cnt - 1.0));
    }
    if (opts.fix_t1r_us) out.param_stddev[2] = 0;
    if (opts.fix_n_avg) out.param_stddev[0] = 0;
    return out;
}

}  // namespace qpump
