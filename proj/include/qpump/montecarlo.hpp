#pragma once

#include <cstdint>
#include <vector>

#include "qpump/fitting.hpp"
#include "qpump/rng.hpp"
#include "qpump/types.hpp"

namespace qpump {

enum class QubitLevel : std::uint8_t { ground, excited };

// State of one stochastic trial: the qubit, the quasiparticles currently in
// the qubit region (excess energies above the gap, GHz) and their exit rates.
struct TrialState {
    QubitLevel qubit = QubitLevel::ground;
    std::vector<double> qp_energy_ghz;
    std::vector<double> qp_exit_rate;
    double clock_us = 0;
    Philox4x32 rng{0, 0, 0};
    bool flagged = false;  // quasiparticle cap exceeded; trial must be excluded
};

struct ProtocolResult {
    DecayTrace trace;                         // population vs readout delay
    std::vector<double> nqp_grid_us;          // time grid, t = 0 at the first pump pulse
    std::vector<double> nqp_vs_time;          // mean quasiparticle number on the grid
    std::vector<double> pre_pulse_population; // excited fraction just before pulse k (last = probe)
    std::vector<std::vector<double>> per_trace_population;  // [block][delay], optional
    double mean_nqp_at_probe = 0;
    double mean_excess_energy_at_probe = 0;   // pooled over quasiparticles, GHz
    long flagged_trials = 0;
    long valid_trials = 0;
};

struct RecoveryPoint {
    double t_delay_us = 0;
    double n_avg = 0;
    double n_avg_err = 0;
    double t1qp_us = 0;
    bool fit_converged = false;
};

struct RecoveryResult {
    std::vector<RecoveryPoint> points;
    RecoveryFit fit;            // exponential recovery constants from the n_avg series
    long flagged_trials = 0;
};

struct EngineOptions {
    double warmup_factor = 10.0;   // warmup time = warmup_factor / gamma_out
    int qp_cap = 64;
    int nqp_grid_points = 200;
    int trace_blocks = 0;          // when > 0, per_trace_population has this many rows
    int n_threads = 0;             // 0 = QPUMP_THREADS env or hardware concurrency
};

// Event-driven simulator of one qubit coupled to a quasiparticle bath.
//
// Competing exponential clocks between events:
//   - arrival at gamma_in (excess energy from the configured arrival
//     distribution),
//   - per-quasiparticle exit at gamma_out, scaled by nu_ref/nu(gap+eps) when
//     energy resolution is on (nu_ref is the arrival-averaged BCS density of
//     states, so the unpumped steady state keeps mean gamma_in/gamma_out),
//   - residual qubit relaxation at 1/t1r while excited,
//   - per-quasiparticle relaxation at 1/t1qp while excited; hands omega0 to
//     that quasiparticle,
//   - per-quasiparticle excitation at eta/t1qp while in the ground state, for
//     quasiparticles with eps >= omega0 (energy-resolved mode only); takes
//     omega0 from that quasiparticle.
class Engine {
public:
    Engine(BathParams bath, DecayParams decay, DeviceParams device, EngineOptions opts = {});

    // Advances one trial to `horizon_us` by exact event sampling.
    void step(TrialState& state, double horizon_us) const;

    // Full pump-probe protocol, averaged over trials. Deterministic for fixed
    // (seed, configuration) regardless of thread count. `trial_offset` shifts
    // the RNG stream index so related runs stay statistically independent.
    //
    // Readout continuations decay the qubit against the bath snapshot taken
    // at the probe (arrivals and exits paused, qubit channels live): number
    // fluctuations act across trials, the quasistatic regime behind the
    // closed-form decay law.
    ProtocolResult run_protocol(const PulseSequence& seq, long n_trials, std::uint64_t seed,
                                std::uint64_t trial_offset = 0) const;

    // Fig.-S3-style experiment: run the pump sequence, delay the probe pulse
    // by each entry of `probe_delays_us`, fit each decay trace (t1r pinned)
    // and fit the exponential recovery of n_avg versus probe delay.
    RecoveryResult recovery_experiment(const PulseSequence& base, std::vector<double> probe_delays_us,
                                       long n_trials, std::uint64_t seed,
                                       const FitOptions& fit_opts) const;

    double exit_rate(double excess_energy_ghz) const;
    double nu_reference() const { return nu_ref_; }
    int resolved_threads() const;

private:
    struct Sampler;
    void advance(TrialState& s, double horizon_us, Sampler* sampler,
                 bool frozen_bath = false) const;
    double draw_arrival_energy(Philox4x32& rng) const;

    BathParams bath_;
    DecayParams decay_;
    DeviceParams device_;
    EngineOptions opts_;
    double nu_ref_ = 1.0;
};

}  // namespace qpump
