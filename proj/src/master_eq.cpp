#include "qpump/master_eq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpump {

NumberDistribution NumberDistribution::delta(int n, int n_max) {
    if (n < 0 || n > n_max) throw std::invalid_argument("delta: n out of range");
    NumberDistribution d;
    d.probs.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
    d.probs[n] = 1.0;
    return d;
}

double NumberDistribution::mean() const {
    double m = 0;
    for (std::size_t n = 0; n < probs.size(); ++n) m += static_cast<double>(n) * probs[n];
    return m;
}

double NumberDistribution::total() const {
    double s = 0;
    for (double p : probs) s += p;
    return s;
}

namespace {

// dP/dt for the truncated generator. The n_max row omits the gin outflow so
// columns sum to zero and probability is conserved exactly.
void apply_generator(const std::vector<double>& p, double gin, double gout,
                     std::vector<double>& dp) {
    const std::size_t n_max = p.size() - 1;
    for (std::size_t n = 0; n <= n_max; ++n) {
        double v = -static_cast<double>(n) * gout * p[n];
        if (n > 0) v += gin * p[n - 1];
        if (n < n_max) v += -gin * p[n] + static_cast<double>(n + 1) * gout * p[n + 1];
        dp[n] = v;
    }
}

struct Rk4Work {
    std::vector<double> k1, k2, k3, k4, tmp;
};

void rk4_step(std::vector<double>& p, double gin, double gout, double h, Rk4Work& w) {
    const std::size_t m = p.size();
    w.k1.resize(m); w.k2.resize(m); w.k3.resize(m); w.k4.resize(m); w.tmp.resize(m);
    apply_generator(p, gin, gout, w.k1);
    for (std::size_t i = 0; i < m; ++i) w.tmp[i] = p[i] + 0.5 * h * w.k1[i];
    apply_generator(w.tmp, gin, gout, w.k2);
    for (std::size_t i = 0; i < m; ++i) w.tmp[i] = p[i] + 0.5 * h * w.k2[i];
    apply_generator(w.tmp, gin, gout, w.k3);
    for (std::size_t i = 0; i < m; ++i) w.tmp[i] = p[i] + h * w.k3[i];
    apply_generator(w.tmp, gin, gout, w.k4);
    for (std::size_t i = 0; i < m; ++i)
        p[i] += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
}

}  // namespace

NumberDistribution evolve(const NumberDistribution& p0, double gamma_in, double gamma_out,
                          double t_us, double dt_max_us, double* leak_out) {
    if (t_us < 0) throw std::domain_error("evolve: t must be non-negative");
    if (gamma_in < 0 || gamma_out < 0)
        throw std::domain_error("evolve: rates must be non-negative");
    if (p0.probs.empty()) throw std::invalid_argument("evolve: empty distribution");
    if (!(dt_max_us > 0)) throw std::domain_error("evolve: dt_max must be positive");

    const std::size_t n_max = p0.probs.size() - 1;
    if (leak_out) *leak_out = 0;
    NumberDistribution out = p0;
    out.time_us = p0.time_us + t_us;
    if (t_us == 0 || (gamma_in == 0 && gamma_out == 0)) return out;

    const double stiffness = static_cast<double>(n_max) * gamma_out + gamma_in;
    double dt = std::min(dt_max_us, 0.1 / stiffness);

    for (int attempt = 0;; ++attempt) {
        std::vector<double> p = p0.probs;
        Rk4Work work;
        const long steps = std::max(1L, static_cast<long>(std::ceil(t_us / dt)));
        const double h = t_us / static_cast<double>(steps);
        double leak = 0;
        bool ok = true;
        for (long s = 0; s < steps; ++s) {
            leak += gamma_in * p[n_max] * h;
            rk4_step(p, gamma_in, gamma_out, h, work);
            double sum = 0;
            for (double& q : p) {
                if (q < 0) {
                    if (q < -1e-12) { ok = false; break; }
                    q = 0;
                }
                sum += q;
            }
            if (!ok || std::fabs(sum - 1.0) > 1e-9) { ok = false; break; }
        }
        if (ok) {
            out.probs = std::move(p);
            if (leak_out) *leak_out = leak;
            return out;
        }
        if (attempt >= 40)
            throw std::runtime_error("evolve: step reduction failed to restore conservation");
        dt *= 0.5;
    }
}

double decay_oracle(const NumberDistribution& dist, const DecayParams& p, double t_us) {
    if (t_us < 0) throw std::domain_error("decay_oracle: t must be non-negative");
    const double per_qp = std::exp(-t_us / p.t1qp_us);
    double qp_factor = 0;
    double weight = 1.0;  // exp(-n t / t1qp) accumulated iteratively
    for (std::size_t n = 0; n < dist.probs.size(); ++n) {
        qp_factor += dist.probs[n] * weight;
        weight *= per_qp;
    }
    return qp_factor * std::exp(-t_us / p.t1r_us);
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0;
    const std::size_t m = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < m; ++i) {
        const double x = i < a.size() ? a[i] : 0.0;
        const double y = i < b.size() ? b[i] : 0.0;
        tv += std::fabs(x - y);
    }
    return 0.5 * tv;
}

}  // namespace qpump
