#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpump {

// Thrown by configuration loading and type validation. `path` names the
// offending field, e.g. "sim.t1qp_us".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what),
          path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Small-junction matrix element |<1|sin(phi_s/2)|0>| versus flux bias,
// tabulated on f >= 0 and evaluated at |f| (the element is even in f).
// Outside the table the value is clamped to the nearest endpoint.
struct MatrixElementTable {
    // Defaults pin the device-A anchors: zero at f = 0 by interference,
    // equal to the large-junction element at f = 0.0019; the last point is an
    // extrapolation guard.
    std::vector<double> f = {0.0, 0.0019, 0.004};
    std::vector<double> me = {0.0, 0.240, 0.30};

    double eval(double flux_bias, bool* clamped = nullptr) const;
    double max_f() const { return f.empty() ? 0.0 : f.back(); }
};

// Qubit and junction constants entering the thermal and flux formulas.
struct DeviceParams {
    double omega0_ghz = 5.37;     // qubit frequency at zero flux bias (nu = omega0/2pi)
    double eps_slope_ghz = 1120;  // 2*Ip*Phi0/h, GHz per unit flux bias
    double ej_large_ghz = 210;    // Josephson energy of a large junction / h
    double gap_ghz = 56.339149;   // superconducting gap Delta/h
    double me_large = 0.240;      // |<1|sin(phi_L/2)|0>|
    double alpha = 0.54;          // small/large junction Josephson energy ratio
    MatrixElementTable me_small_table;
};

// The non-exponential decay triple: mean quasiparticle number, relaxation
// time induced by one quasiparticle, residual relaxation time.
struct DecayParams {
    double n_avg = 0.0;
    double t1qp_us = 23.0;
    double t1r_us = 55.0;
};

// Quasiparticle reservoir parameters.
enum class ArrivalEnergyDist : std::uint8_t { delta, exponential };

struct BathParams {
    double gamma_in = 1.0 / 150.0;   // 1/us
    double gamma_out = 1.0 / 300.0;  // 1/us, exit rate of a quasiparticle at delta_e
    double delta_e_ghz = 1.46;       // characteristic excess energy above the gap
    bool energy_resolved = true;
    double excitation_ratio = 1.0;   // eta, excitation/relaxation rate ratio
    ArrivalEnergyDist arrival_dist = ArrivalEnergyDist::delta;
};

// Pump protocol: N pulses spaced `spacing_us`, a probe pulse `probe_delay_us`
// after the last pump pulse, readout at each delay of `readout_grid_us`.
struct PulseSequence {
    int n_pulses = 0;
    double spacing_us = 10.0;
    double theta_rad = 3.14159265358979323846;
    double probe_delay_us = 10.0;
    std::vector<double> readout_grid_us;
    double repetition_period_us = 2000.0;
};

// Sampled population-vs-delay curve.
struct DecayTrace {
    std::vector<double> delays_us;
    std::vector<double> populations;
    std::vector<double> stderrs;  // empty allowed
    long n_trials = 0;
};

// Normalized BCS density of states nu(eps) = eps/sqrt(eps^2 - gap^2).
// Requires eps > gap; diverges at the gap edge.
double bcs_dos(double energy_ghz, double gap_ghz);

// Rescales a trace so the first point reads 1 (standard errors scale along);
// pump traces are normalized this way before fitting. Requires a positive
// first population.
DecayTrace normalized_to_first(DecayTrace trace);

// Invariant checks; throw ConfigError naming the first violated field.
void validate(const DeviceParams& d, const std::string& path = "device");
void validate(const DecayParams& p, const std::string& path = "decay");
void validate(const BathParams& b, const std::string& path = "bath");
void validate(const PulseSequence& s, const std::string& path = "pulses");
void validate(const DecayTrace& t, const std::string& path = "trace");

}  // namespace qpump
