#include "qpump/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "qpump/constants.hpp"

namespace qpump {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& known) {
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError(path + "." + key, "unknown key");
}

double get_num(const json& j, const std::string& path, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(path + "." + key, "expected a number");
    return j[key].get<double>();
}

long get_int(const json& j, const std::string& path, const std::string& key, long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    return j[key].get<long>();
}

bool get_bool(const json& j, const std::string& path, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
    return j[key].get<bool>();
}

std::vector<double> get_vec(const json& j, const std::string& path, const std::string& key,
                            std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) throw ConfigError(path + "." + key, "expected an array");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw ConfigError(path + "." + key, "expected numeric entries");
        out.push_back(v.get<double>());
    }
    return out;
}

// Resolves a value that may be given in GHz or meV (exclusive keys).
double energy_ghz(const json& j, const std::string& path, const std::string& base,
                  double fallback) {
    const std::string ghz_key = base + "_ghz", mev_key = base + "_mev";
    if (j.contains(ghz_key) && j.contains(mev_key))
        throw ConfigError(path + "." + mev_key, "give either _ghz or _mev, not both");
    if (j.contains(mev_key)) {
        if (!j[mev_key].is_number()) throw ConfigError(path + "." + mev_key, "expected a number");
        return j[mev_key].get<double>() * Constants::mev_to_ghz;
    }
    return get_num(j, path, ghz_key, fallback);
}

std::vector<double> default_readout_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 30; ++i) g.push_back(5.0 * i);  // 0..150 us
    return g;
}

std::vector<double> default_probe_delay_grid() {
    return {0,   25,  50,  75,  100, 150, 200,  300,  400,  500,
            650, 800, 1000, 1200, 1500, 1800, 2100, 2400};
}

std::vector<double> default_temperature_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 33; ++i) g.push_back(0.02 + 0.01 * i);  // 0.02..0.35 K
    return g;
}

std::vector<double> default_flux_grid() {
    std::vector<double> g;
    for (int i = -8; i <= 8; ++i) g.push_back(5e-4 * i);  // -0.004..0.004
    return g;
}

DeviceParams parse_device(const json& j) {
    DeviceParams d = device_preset("deviceA");
    if (j.is_null()) return d;
    reject_unknown(j, "device",
                   {"preset", "omega0_ghz", "eps_slope_ghz", "ej_large_ghz", "gap_ghz", "gap_mev",
                    "me_large", "alpha", "me_small_table"});
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) throw ConfigError("device.preset", "expected a string");
        d = device_preset(j["preset"].get<std::string>());
    }
    d.omega0_ghz = get_num(j, "device", "omega0_ghz", d.omega0_ghz);
    d.eps_slope_ghz = get_num(j, "device", "eps_slope_ghz", d.eps_slope_ghz);
    d.ej_large_ghz = get_num(j, "device", "ej_large_ghz", d.ej_large_ghz);
    d.gap_ghz = energy_ghz(j, "device", "gap", d.gap_ghz);
    d.me_large = get_num(j, "device", "me_large", d.me_large);
    d.alpha = get_num(j, "device", "alpha", d.alpha);
    if (j.contains("me_small_table")) {
        if (!j["me_small_table"].is_array())
            throw ConfigError("device.me_small_table", "expected an array of [f, me] pairs");
        MatrixElementTable t;
        t.f.clear();
        t.me.clear();
        for (const auto& row : j["me_small_table"]) {
            if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
                throw ConfigError("device.me_small_table", "expected [f, me] pairs");
            t.f.push_back(row[0].get<double>());
            t.me.push_back(row[1].get<double>());
        }
        d.me_small_table = std::move(t);
    }
    return d;
}

BathParams parse_bath(const json& j) {
    BathParams b;
    if (j.is_null()) return b;
    reject_unknown(j, "bath",
                   {"gamma_in_per_us", "gamma_out_per_us", "delta_e_ghz", "delta_e_mev",
                    "energy_resolved", "excitation_ratio", "arrival_energy_dist"});
    b.gamma_in = get_num(j, "bath", "gamma_in_per_us", b.gamma_in);
    b.gamma_out = get_num(j, "bath", "gamma_out_per_us", b.gamma_out);
    b.delta_e_ghz = energy_ghz(j, "bath", "delta_e", b.delta_e_ghz);
    b.energy_resolved = get_bool(j, "bath", "energy_resolved", b.energy_resolved);
    b.excitation_ratio = get_num(j, "bath", "excitation_ratio", b.excitation_ratio);
    if (j.contains("arrival_energy_dist")) {
        if (!j["arrival_energy_dist"].is_string())
            throw ConfigError("bath.arrival_energy_dist", "expected a string");
        const auto s = j["arrival_energy_dist"].get<std::string>();
        if (s == "delta")
            b.arrival_dist = ArrivalEnergyDist::delta;
        else if (s == "exponential")
            b.arrival_dist = ArrivalEnergyDist::exponential;
        else
            throw ConfigError("bath.arrival_energy_dist", "must be \"delta\" or \"exponential\"");
    }
    return b;
}

PulseSequence parse_pulses(const json& j) {
    PulseSequence s;
    s.readout_grid_us = default_readout_grid();
    if (j.is_null()) return s;
    reject_unknown(j, "pulses",
                   {"n_pulses", "spacing_us", "theta_rad", "theta_pi", "probe_delay_us",
                    "readout_grid_us", "repetition_period_us"});
    s.n_pulses = static_cast<int>(get_int(j, "pulses", "n_pulses", s.n_pulses));
    s.spacing_us = get_num(j, "pulses", "spacing_us", s.spacing_us);
    if (j.contains("theta_rad") && j.contains("theta_pi"))
        throw ConfigError("pulses.theta_pi", "give either theta_rad or theta_pi, not both");
    if (j.contains("theta_pi"))
        s.theta_rad = get_num(j, "pulses", "theta_pi", 1.0) * std::numbers::pi;
    else
        s.theta_rad = get_num(j, "pulses", "theta_rad", s.theta_rad);
    s.probe_delay_us = get_num(j, "pulses", "probe_delay_us", s.probe_delay_us);
    s.readout_grid_us = get_vec(j, "pulses", "readout_grid_us", s.readout_grid_us);
    s.repetition_period_us = get_num(j, "pulses", "repetition_period_us", s.repetition_period_us);
    return s;
}

SimConfig parse_sim(const json& j) {
    SimConfig s;
    s.probe_delay_grid_us = default_probe_delay_grid();
    s.temperature_grid_k = default_temperature_grid();
    s.flux_grid = default_flux_grid();
    if (j.is_null()) return s;
    reject_unknown(j, "sim",
                   {"n_trials", "seed", "t1qp_us", "t1r_us", "warmup_factor", "qp_cap",
                    "max_flagged_fraction", "pulse_counts", "probe_delay_grid_us",
                    "nqp_grid_points", "trace_blocks", "temperature_grid_k", "t1ne_us",
                    "flux_grid", "t1qp0_us"});
    s.n_trials = get_int(j, "sim", "n_trials", s.n_trials);
    s.seed = static_cast<std::uint64_t>(get_int(j, "sim", "seed", static_cast<long>(s.seed)));
    s.t1qp_us = get_num(j, "sim", "t1qp_us", s.t1qp_us);
    s.t1r_us = get_num(j, "sim", "t1r_us", s.t1r_us);
    s.warmup_factor = get_num(j, "sim", "warmup_factor", s.warmup_factor);
    s.qp_cap = static_cast<int>(get_int(j, "sim", "qp_cap", s.qp_cap));
    s.max_flagged_fraction = get_num(j, "sim", "max_flagged_fraction", s.max_flagged_fraction);
    if (j.contains("pulse_counts")) {
        s.pulse_counts.clear();
        for (double v : get_vec(j, "sim", "pulse_counts", {}))
            s.pulse_counts.push_back(static_cast<int>(v));
    }
    s.probe_delay_grid_us = get_vec(j, "sim", "probe_delay_grid_us", s.probe_delay_grid_us);
    s.nqp_grid_points = static_cast<int>(get_int(j, "sim", "nqp_grid_points", s.nqp_grid_points));
    s.trace_blocks = static_cast<int>(get_int(j, "sim", "trace_blocks", s.trace_blocks));
    s.temperature_grid_k = get_vec(j, "sim", "temperature_grid_k", s.temperature_grid_k);
    s.t1ne_us = get_num(j, "sim", "t1ne_us", s.t1ne_us);
    s.flux_grid = get_vec(j, "sim", "flux_grid", s.flux_grid);
    s.t1qp0_us = get_num(j, "sim", "t1qp0_us", s.t1qp0_us);
    return s;
}

FitConfig parse_fit(const json& j) {
    FitConfig f;
    if (j.is_null()) return f;
    reject_unknown(j, "fit",
                   {"fix_t1r_us", "fix_n_avg", "max_iter", "tol", "n_avg_bounds", "t1qp_bounds_us",
                    "t1r_bounds_us"});
    if (j.contains("fix_t1r_us")) f.fix_t1r_us = get_num(j, "fit", "fix_t1r_us", 0);
    if (j.contains("fix_n_avg")) f.fix_n_avg = get_num(j, "fit", "fix_n_avg", 0);
    f.max_iter = static_cast<int>(get_int(j, "fit", "max_iter", f.max_iter));
    f.tol = get_num(j, "fit", "tol", f.tol);
    auto bounds = [&](const char* key, ParamBounds& b) {
        if (!j.contains(key)) return;
        const auto v = get_vec(j, "fit", key, {});
        if (v.size() != 2) throw ConfigError(std::string("fit.") + key, "expected [lo, hi]");
        b = ParamBounds{v[0], v[1]};
    };
    bounds("n_avg_bounds", f.n_avg_bounds);
    bounds("t1qp_bounds_us", f.t1qp_bounds);
    bounds("t1r_bounds_us", f.t1r_bounds);
    return f;
}

void validate_config(const Config& c) {
    validate(c.device, "device");
    validate(c.bath, "bath");
    validate(c.pulses, "pulses");

    const std::string sim = "sim";
    if (c.sim.n_trials < 1) throw ConfigError(sim + ".n_trials", "must be positive");
    if (!(c.sim.t1qp_us > 0)) throw ConfigError(sim + ".t1qp_us", "t1qp must be positive");
    if (!(c.sim.t1r_us > 0)) throw ConfigError(sim + ".t1r_us", "t1r must be positive");
    if (!(c.sim.warmup_factor > 0)) throw ConfigError(sim + ".warmup_factor", "must be positive");
    if (c.sim.qp_cap < 1) throw ConfigError(sim + ".qp_cap", "must be positive");
    if (c.sim.max_flagged_fraction < 0 || c.sim.max_flagged_fraction > 1)
        throw ConfigError(sim + ".max_flagged_fraction", "must lie in [0,1]");
    for (int n : c.sim.pulse_counts)
        if (n < 0) throw ConfigError(sim + ".pulse_counts", "must be non-negative");
    for (std::size_t i = 1; i < c.sim.probe_delay_grid_us.size(); ++i)
        if (!(c.sim.probe_delay_grid_us[i] > c.sim.probe_delay_grid_us[i - 1]))
            throw ConfigError(sim + ".probe_delay_grid_us", "must be strictly increasing");
    if (c.sim.nqp_grid_points < 2) throw ConfigError(sim + ".nqp_grid_points", "must be >= 2");
    if (c.sim.trace_blocks < 0) throw ConfigError(sim + ".trace_blocks", "must be non-negative");
    if (c.sim.trace_blocks > 0 && c.sim.n_trials % c.sim.trace_blocks != 0)
        throw ConfigError(sim + ".trace_blocks", "must divide n_trials");
    for (double t : c.sim.temperature_grid_k)
        if (!(t > 0)) throw ConfigError(sim + ".temperature_grid_k", "temperatures must be positive");
    if (!(c.sim.t1ne_us > 0)) throw ConfigError(sim + ".t1ne_us", "must be positive");
    if (!(c.sim.t1qp0_us > 0)) throw ConfigError(sim + ".t1qp0_us", "must be positive");

    const std::string fit = "fit";
    if (c.fit.fix_t1r_us && !(*c.fit.fix_t1r_us > 0))
        throw ConfigError(fit + ".fix_t1r_us", "must be positive");
    if (c.fit.fix_n_avg && *c.fit.fix_n_avg < 0)
        throw ConfigError(fit + ".fix_n_avg", "must be non-negative");
    if (c.fit.max_iter < 1) throw ConfigError(fit + ".max_iter", "must be positive");
    if (!(c.fit.tol > 0)) throw ConfigError(fit + ".tol", "must be positive");
    auto check_bounds = [&](const char* key, const ParamBounds& b) {
        if (!(b.lo < b.hi)) throw ConfigError(fit + "." + key, "lower bound must be below upper");
    };
    check_bounds("n_avg_bounds", c.fit.n_avg_bounds);
    check_bounds("t1qp_bounds_us", c.fit.t1qp_bounds);
    check_bounds("t1r_bounds_us", c.fit.t1r_bounds);
}

}  // namespace

DeviceParams device_preset(const std::string& name) {
    DeviceParams d;
    d.omega0_ghz = 5.37;
    d.eps_slope_ghz = 1120;
    d.ej_large_ghz = 210;
    d.gap_ghz = 0.233 * Constants::mev_to_ghz;
    d.me_large = 0.240;
    d.alpha = 0.54;
    // Anchors: zero at f = 0, equal to the large-junction element at
    // f = 0.0019; the last point only guards against flat extrapolation.
    d.me_small_table.f = {0.0, 0.0019, 0.004};
    d.me_small_table.me = {0.0, 0.240, 0.30};
    if (name == "deviceA") return d;
    if (name == "deviceB") {
        d.omega0_ghz = 4.7;
        return d;
    }
    throw ConfigError("device.preset", "unknown preset \"" + name + "\"");
}

Config config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
    reject_unknown(j, "config", {"device", "bath", "pulses", "sim", "fit"});
    Config c;
    c.device = parse_device(j.contains("device") ? j["device"] : json());
    c.bath = parse_bath(j.contains("bath") ? j["bath"] : json());
    c.pulses = parse_pulses(j.contains("pulses") ? j["pulses"] : json());
    c.sim = parse_sim(j.contains("sim") ? j["sim"] : json());
    c.fit = parse_fit(j.contains("fit") ? j["fit"] : json());
    validate_config(c);
    return c;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "config not found");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

nlohmann::json to_json(const Config& c) {
    json me_table = json::array();
    for (std::size_t i = 0; i < c.device.me_small_table.f.size(); ++i)
        me_table.push_back({c.device.me_small_table.f[i], c.device.me_small_table.me[i]});

    json j{
        {"device",
         {{"omega0_ghz", c.device.omega0_ghz},
          {"eps_slope_ghz", c.device.eps_slope_ghz},
          {"ej_large_ghz", c.device.ej_large_ghz},
          {"gap_ghz", c.device.gap_ghz},
          {"me_large", c.device.me_large},
          {"alpha", c.device.alpha},
          {"me_small_table", me_table}}},
        {"bath",
         {{"gamma_in_per_us", c.bath.gamma_in},
          {"gamma_out_per_us", c.bath.gamma_out},
          {"delta_e_ghz", c.bath.delta_e_ghz},
          {"energy_resolved", c.bath.energy_resolved},
          {"excitation_ratio", c.bath.excitation_ratio},
          {"arrival_energy_dist",
           c.bath.arrival_dist == ArrivalEnergyDist::delta ? "delta" : "exponential"}}},
        {"pulses",
         {{"n_pulses", c.pulses.n_pulses},
          {"spacing_us", c.pulses.spacing_us},
          {"theta_rad", c.pulses.theta_rad},
          {"probe_delay_us", c.pulses.probe_delay_us},
          {"readout_grid_us", c.pulses.readout_grid_us},
          {"repetition_period_us", c.pulses.repetition_period_us}}},
        {"sim",
         {{"n_trials", c.sim.n_trials},
          {"seed", c.sim.seed},
          {"t1qp_us", c.sim.t1qp_us},
          {"t1r_us", c.sim.t1r_us},
          {"warmup_factor", c.sim.warmup_factor},
          {"qp_cap", c.sim.qp_cap},
          {"max_flagged_fraction", c.sim.max_flagged_fraction},
          {"pulse_counts", c.sim.pulse_counts},
          {"probe_delay_grid_us", c.sim.probe_delay_grid_us},
          {"nqp_grid_points", c.sim.nqp_grid_points},
          {"trace_blocks", c.sim.trace_blocks},
          {"temperature_grid_k", c.sim.temperature_grid_k},
          {"t1ne_us", c.sim.t1ne_us},
          {"flux_grid", c.sim.flux_grid},
          {"t1qp0_us", c.sim.t1qp0_us}}},
        {"fit",
         {{"max_iter", c.fit.max_iter},
          {"tol", c.fit.tol},
          {"n_avg_bounds", {c.fit.n_avg_bounds.lo, c.fit.n_avg_bounds.hi}},
          {"t1qp_bounds_us", {c.fit.t1qp_bounds.lo, c.fit.t1qp_bounds.hi}},
          {"t1r_bounds_us", {c.fit.t1r_bounds.lo, c.fit.t1r_bounds.hi}}}},
    };
    if (c.fit.fix_t1r_us) j["fit"]["fix_t1r_us"] = *c.fit.fix_t1r_us;
    if (c.fit.fix_n_avg) j["fit"]["fix_n_avg"] = *c.fit.fix_n_avg;
    return j;
}

std::string config_digest(const Config& c) {
    const std::string dump = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

FitOptions fit_options(const FitConfig& f) {
    FitOptions o;
    o.fix_t1r_us = f.fix_t1r_us;
    o.fix_n_avg = f.fix_n_avg;
    o.max_iter = f.max_iter;
    o.tol = f.tol;
    o.n_avg_bounds = f.n_avg_bounds;
    o.t1qp_bounds = f.t1qp_bounds;
    o.t1r_bounds = f.t1r_bounds;
    return o;
}

}  // namespace qpump
