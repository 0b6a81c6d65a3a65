#include "qpump/types.hpp"

#include <cmath>

namespace qpump {

double MatrixElementTable::eval(double flux_bias, bool* clamped) const {
    if (clamped) *clamped = false;
    if (f.empty()) return 0.0;
    const double x = std::fabs(flux_bias);
    if (x <= f.front()) {
        if (clamped && x < f.front()) *clamped = true;
        return me.front();
    }
    if (x >= f.back()) {
        if (clamped && x > f.back()) *clamped = true;
        return me.back();
    }
    std::size_t hi = 1;
    while (f[hi] < x) ++hi;
    const double w = (x - f[hi - 1]) / (f[hi] - f[hi - 1]);
    return me[hi - 1] + w * (me[hi] - me[hi - 1]);
}

double bcs_dos(double energy_ghz, double gap_ghz) {
    if (!(energy_ghz > gap_ghz))
        throw std::domain_error("bcs_dos: energy must exceed the gap");
    return energy_ghz / std::sqrt((energy_ghz - gap_ghz) * (energy_ghz + gap_ghz));
}

DecayTrace normalized_to_first(DecayTrace trace) {
    if (trace.populations.empty() || !(trace.populations.front() > 0))
        throw std::invalid_argument("normalized_to_first: first population must be positive");
    const double p0 = trace.populations.front();
    for (double& p : trace.populations) p = std::min(p / p0, 1.0);
    for (double& s : trace.stderrs) s /= p0;
    return trace;
}

namespace {

void require(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) throw ConfigError(path, msg);
}

}  // namespace

void validate(const DeviceParams& d, const std::string& path) {
    require(d.omega0_ghz > 0, path + ".omega0_ghz", "must be positive");
    require(d.eps_slope_ghz >= 0, path + ".eps_slope_ghz", "must be non-negative");
    require(d.ej_large_ghz > 0, path + ".ej_large_ghz", "must be positive");
    require(d.gap_ghz > 0, path + ".gap_ghz", "must be positive");
    require(d.me_large >= 0 && d.me_large <= 1, path + ".me_large", "must lie in [0,1]");
    require(d.alpha >= 0, path + ".alpha", "must be non-negative");
    const auto& t = d.me_small_table;
    require(t.f.size() == t.me.size(), path + ".me_small_table", "f and me lengths differ");
    require(!t.f.empty(), path + ".me_small_table", "must not be empty");
    require(t.f.front() == 0.0, path + ".me_small_table", "first entry must be at f = 0");
    require(t.me.front() == 0.0, path + ".me_small_table", "matrix element must vanish at f = 0");
    for (std::size_t i = 0; i < t.f.size(); ++i) {
        require(t.me[i] >= 0 && t.me[i] <= 1, path + ".me_small_table",
                "matrix elements must lie in [0,1]");
        if (i > 0)
            require(t.f[i] > t.f[i - 1], path + ".me_small_table",
                    "flux points must be strictly increasing");
    }
}

void validate(const DecayParams& p, const std::string& path) {
    require(p.n_avg >= 0, path + ".n_avg", "must be non-negative");
    require(p.t1qp_us > 0, path + ".t1qp_us", "t1qp must be positive");
    require(p.t1r_us > 0, path + ".t1r_us", "t1r must be positive");
}

void validate(const BathParams& b, const std::string& path) {
    require(b.gamma_in >= 0, path + ".gamma_in_per_us", "must be non-negative");
    require(b.gamma_out > 0, path + ".gamma_out_per_us", "must be positive");
    require(b.delta_e_ghz > 0, path + ".delta_e_ghz", "must be positive");
    require(b.excitation_ratio >= 0, path + ".excitation_ratio", "must be non-negative");
}

void validate(const PulseSequence& s, const std::string& path) {
    require(s.n_pulses >= 0, path + ".n_pulses", "must be non-negative");
    if (s.n_pulses > 0)
        require(s.spacing_us > 0, path + ".spacing_us", "must be positive when pulses are used");
    require(s.probe_delay_us >= 0, path + ".probe_delay_us", "must be non-negative");
    require(!s.readout_grid_us.empty(), path + ".readout_grid_us", "must not be empty");
    require(s.readout_grid_us.front() >= 0, path + ".readout_grid_us",
            "first delay must be non-negative");
    for (std::size_t i = 1; i < s.readout_grid_us.size(); ++i)
        require(s.readout_grid_us[i] > s.readout_grid_us[i - 1], path + ".readout_grid_us",
                "delays must be strictly increasing");
    require(s.repetition_period_us > s.readout_grid_us.back(), path + ".repetition_period_us",
            "must exceed the largest readout delay");
}

void validate(const DecayTrace& t, const std::string& path) {
    require(t.delays_us.size() == t.populations.size(), path, "delays and populations lengths differ");
    require(t.stderrs.empty() || t.stderrs.size() == t.delays_us.size(), path,
            "stderr length must match delays");
    for (double p : t.populations)
        require(p >= 0 && p <= 1, path + ".populations", "must lie in [0,1]");
    for (double s : t.stderrs)
        require(s >= 0, path + ".stderr", "must be non-negative");
    require(t.n_trials >= 0, path + ".n_trials", "must be non-negative");
}

}  // namespace qpump
