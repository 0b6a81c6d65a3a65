#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpump/fitting.hpp"
#include "qpump/types.hpp"

namespace qpump {

struct SimConfig {
    long n_trials = 100000;
    std::uint64_t seed = 1;
    double t1qp_us = 23.0;
    double t1r_us = 55.0;
    double warmup_factor = 10.0;  // warmup time = warmup_factor / gamma_out
    int qp_cap = 64;
    double max_flagged_fraction = 0.01;
    std::vector<int> pulse_counts = {0, 1, 2, 5, 10, 20, 40};
    std::vector<double> probe_delay_grid_us;
    int nqp_grid_points = 200;
    int trace_blocks = 0;
    std::vector<double> temperature_grid_k;
    double t1ne_us = 55.0;
    std::vector<double> flux_grid;
    double t1qp0_us = 23.0;
};

struct FitConfig {
    std::optional<double> fix_t1r_us;
    std::optional<double> fix_n_avg;
    int max_iter = 200;
    double tol = 1e-12;
    ParamBounds n_avg_bounds{0.0, 20.0};
    ParamBounds t1qp_bounds{0.1, 1e3};
    ParamBounds t1r_bounds{0.1, 1e4};
};

// A full run configuration: the five top-level sections of the JSON file.
struct Config {
    DeviceParams device;
    BathParams bath;
    PulseSequence pulses;
    SimConfig sim;
    FitConfig fit;
};

// Parses and validates; unknown keys are rejected with their path. Energies
// may be given in meV through `gap_mev` / `delta_e_mev`, pulse angles in
// units of pi through `theta_pi`. Missing keys take documented defaults
// (device A).
Config config_from_json(const nlohmann::json& j);

// Reads a file; throws ConfigError("config not found") when absent.
Config load_config_file(const std::string& path);

// Serializes the resolved configuration; config_from_json(to_json(c))
// round-trips bit-exactly.
nlohmann::json to_json(const Config& c);

// FNV-1a 64-bit hash of the canonical (key-sorted) dump, hex-encoded.
// Stable across key order and whitespace in the source file.
std::string config_digest(const Config& c);

FitOptions fit_options(const FitConfig& f);

// Named device presets: "deviceA" (5.37 GHz) and "deviceB" (4.7 GHz).
DeviceParams device_preset(const std::string& name);

}  // namespace qpump
