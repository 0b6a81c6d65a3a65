#include "qpump/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "qpump/analytic.hpp"

namespace qpump {

namespace {

constexpr double kMinExcessEnergy = 1e-9;  // GHz; keeps nu finite after cooling

// E[nu(gap + eps)] over eps ~ Exp(mean). The 1/sqrt(eps) edge singularity is
// removed by substituting eps = mean * s^2; the s = 0 endpoint takes the
// finite limit 2*sqrt(gap/(2*mean)).
double arrival_averaged_dos(double gap, double mean) {
    const double smax = 8.0;
    const int n = 4000;  // composite Simpson, even count
    const double h = smax / n;
    auto f = [&](double s) {
        if (s == 0.0) return 2.0 * std::sqrt(gap / (2.0 * mean));
        return 2.0 * s * std::exp(-s * s) * bcs_dos(gap + mean * s * s, gap);
    };
    double sum = f(0.0) + f(smax);
    for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

long env_thread_cap() {
    if (const char* v = std::getenv("QPUMP_THREADS")) {
        const long n = std::strtol(v, nullptr, 10);
        if (n > 0) return n;
    }
    return 0;
}

}  // namespace

struct Engine::Sampler {
    std::span<const double> grid_abs_us;
    std::vector<int>* out = nullptr;
    std::size_t next = 0;

    void record_until(double t_us, int count) {
        while (next < grid_abs_us.size() && grid_abs_us[next] <= t_us) {
            (*out)[next] = count;
            ++next;
        }
    }
};

Engine::Engine(BathParams bath, DecayParams decay, DeviceParams device, EngineOptions opts)
    : bath_(bath), decay_(decay), device_(device), opts_(opts) {
    validate(bath_);
    validate(decay_);
    validate(device_);
    if (opts_.qp_cap < 1) throw std::invalid_argument("Engine: qp_cap must be positive");
    if (bath_.energy_resolved) {
        nu_ref_ = bath_.arrival_dist == ArrivalEnergyDist::delta
                      ? bcs_dos(device_.gap_ghz + bath_.delta_e_ghz, device_.gap_ghz)
                      : arrival_averaged_dos(device_.gap_ghz, bath_.delta_e_ghz);
    }
}

double Engine::exit_rate(double excess_energy_ghz) const {
    if (!bath_.energy_resolved) return bath_.gamma_out;
    return bath_.gamma_out * nu_ref_ / bcs_dos(device_.gap_ghz + excess_energy_ghz, device_.gap_ghz);
}

double Engine::draw_arrival_energy(Philox4x32& rng) const {
    if (bath_.arrival_dist == ArrivalEnergyDist::delta) return bath_.delta_e_ghz;
    return std::max(bath_.delta_e_ghz * rng.exponential(1.0), kMinExcessEnergy);
}

int Engine::resolved_threads() const {
    if (opts_.n_threads > 0) return opts_.n_threads;
    if (const long cap = env_thread_cap(); cap > 0) return static_cast<int>(cap);
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void Engine::advance(TrialState& s, double horizon_us, Sampler* sampler, bool frozen_bath) const {
    const double inv_t1r = 1.0 / decay_.t1r_us;
    const double inv_t1qp = 1.0 / decay_.t1qp_us;
    const double exc_rate = bath_.excitation_ratio * inv_t1qp;
    const double omega0 = device_.omega0_ghz;
    const double gamma_in = frozen_bath ? 0.0 : bath_.gamma_in;

    while (s.clock_us < horizon_us && !s.flagged) {
        const std::size_t n_qp = s.qp_energy_ghz.size();
        double exit_sum = 0;
        if (!frozen_bath)
            for (double r : s.qp_exit_rate) exit_sum += r;

        std::size_t n_excitable = 0;
        double total = gamma_in + exit_sum;
        if (s.qubit == QubitLevel::excited) {
            total += inv_t1r + static_cast<double>(n_qp) * inv_t1qp;
        } else if (!frozen_bath && bath_.energy_resolved && exc_rate > 0) {
            for (double e : s.qp_energy_ghz)
                if (e >= omega0) ++n_excitable;
            total += static_cast<double>(n_excitable) * exc_rate;
        }

        if (total <= 0) break;  // frozen state

        const double dt = s.rng.exponential(total);
        if (s.clock_us + dt >= horizon_us) break;
        if (sampler) sampler->record_until(s.clock_us + dt, static_cast<int>(n_qp));
        s.clock_us += dt;

        double u = s.rng.uniform() * total;

        if ((u -= gamma_in) < 0) {
            if (n_qp >= static_cast<std::size_t>(opts_.qp_cap)) {
                s.flagged = true;
                break;
            }
            const double e = draw_arrival_energy(s.rng);
            s.qp_energy_ghz.push_back(e);
            s.qp_exit_rate.push_back(exit_rate(e));
            continue;
        }

        bool handled = false;
        for (std::size_t i = 0; !frozen_bath && i < n_qp; ++i) {
            if ((u -= s.qp_exit_rate[i]) < 0) {
                s.qp_energy_ghz[i] = s.qp_energy_ghz.back();
                s.qp_exit_rate[i] = s.qp_exit_rate.back();
                s.qp_energy_ghz.pop_back();
                s.qp_exit_rate.pop_back();
                handled = true;
                break;
            }
        }
        if (handled) continue;

        if (s.qubit == QubitLevel::excited) {
            if ((u -= inv_t1r) < 0) {
                s.qubit = QubitLevel::ground;
                continue;
            }
            // Relaxation through one quasiparticle: qubit energy is handed to it.
            std::size_t i = std::min(static_cast<std::size_t>(u / inv_t1qp), n_qp - 1);
            s.qubit = QubitLevel::ground;
            s.qp_energy_ghz[i] += omega0;
            s.qp_exit_rate[i] = exit_rate(s.qp_energy_ghz[i]);
        } else {
            if (frozen_bath || !bath_.energy_resolved || exc_rate <= 0) continue;  // fp residue
            // Excitation by a hot quasiparticle, which pays omega0.
            std::size_t picked = n_qp;
            for (std::size_t i = 0; i < n_qp; ++i) {
                if (s.qp_energy_ghz[i] < omega0) continue;
                if ((u -= exc_rate) < 0) {
                    picked = i;
                    break;
                }
                picked = i;  // residue lands on the last excitable channel
            }
            if (picked == n_qp || s.qp_energy_ghz[picked] < omega0) continue;
            s.qubit = QubitLevel::excited;
            s.qp_energy_ghz[picked] = std::max(s.qp_energy_ghz[picked] - omega0, kMinExcessEnergy);
            s.qp_exit_rate[picked] = exit_rate(s.qp_energy_ghz[picked]);
        }
    }
    if (!s.flagged) s.clock_us = horizon_us;
    if (sampler) sampler->record_until(horizon_us, static_cast<int>(s.qp_energy_ghz.size()));
}

void Engine::step(TrialState& state, double horizon_us) const {
    if (!(horizon_us >= state.clock_us))
        throw std::invalid_argument("step: horizon must not precede the trial clock");
    // Exit rates may be stale if energies were set directly.
    state.qp_exit_rate.resize(state.qp_energy_ghz.size());
    for (std::size_t i = 0; i < state.qp_energy_ghz.size(); ++i)
        state.qp_exit_rate[i] = exit_rate(state.qp_energy_ghz[i]);
    advance(state, horizon_us, nullptr);
}

namespace {

// Per-chunk accumulators; chunks cover fixed trial ranges so that the
// reduction is independent of thread scheduling.
struct ChunkAccum {
    std::vector<long> readout_counts;
    std::vector<long long> nqp_sums;
    std::vector<long> pre_pulse_counts;
    double nqp_probe_sum = 0;
    double excess_energy_sum = 0;
    long long qp_at_probe = 0;
    long valid = 0;
    long flagged = 0;
};

}  // namespace

ProtocolResult Engine::run_protocol(const PulseSequence& seq, long n_trials, std::uint64_t seed,
                                    std::uint64_t trial_offset) const {
    validate(seq);
    if (n_trials < 1) throw std::invalid_argument("run_protocol: need at least one trial");
    if (opts_.trace_blocks > 0 && n_trials % opts_.trace_blocks != 0)
        throw std::invalid_argument("run_protocol: n_trials must be divisible by trace_blocks");

    const double warmup_us = opts_.warmup_factor / bath_.gamma_out;
    const int n_pulses = seq.n_pulses;
    std::vector<double> pulse_times;
    pulse_times.reserve(n_pulses);
    for (int k = 0; k < n_pulses; ++k) pulse_times.push_back(warmup_us + k * seq.spacing_us);
    const double probe_time =
        warmup_us + (n_pulses > 0 ? (n_pulses - 1) * seq.spacing_us : 0.0) + seq.probe_delay_us;

    const std::size_t n_delays = seq.readout_grid_us.size();
    std::vector<double> readout_abs(n_delays);
    for (std::size_t j = 0; j < n_delays; ++j) readout_abs[j] = probe_time + seq.readout_grid_us[j];

    const int grid_points = std::max(2, opts_.nqp_grid_points);
    std::vector<double> grid_abs(grid_points);
    for (int g = 0; g < grid_points; ++g)
        grid_abs[g] = warmup_us + (probe_time - warmup_us) * g / (grid_points - 1);

    const double flip_prob = std::pow(std::sin(0.5 * seq.theta_rad), 2);

    // Fixed chunk layout: byte-identical output for any worker count.
    const long chunk_size = opts_.trace_blocks > 0 ? n_trials / opts_.trace_blocks : 1024;
    const long n_chunks = (n_trials + chunk_size - 1) / chunk_size;
    std::vector<ChunkAccum> chunks(n_chunks);

    std::atomic<long> next_chunk{0};
    auto worker = [&]() {
        std::vector<int> nqp_samples(grid_points);
        std::vector<std::uint8_t> outcomes(n_delays);
        std::vector<std::uint8_t> pre_pulse(n_pulses + 1);
        for (;;) {
            const long c = next_chunk.fetch_add(1);
            if (c >= n_chunks) return;
            ChunkAccum& acc = chunks[c];
            acc.readout_counts.assign(n_delays, 0);
            acc.nqp_sums.assign(grid_points, 0);
            acc.pre_pulse_counts.assign(n_pulses + 1, 0);
            const long first = c * chunk_size;
            const long last = std::min(n_trials, first + chunk_size);
            for (long i = first; i < last; ++i) {
                const std::uint64_t stream = trial_offset + static_cast<std::uint64_t>(i);
                TrialState st;
                st.rng = Philox4x32(seed, stream, 0);
                advance(st, warmup_us, nullptr);

                Sampler sampler{grid_abs, &nqp_samples, 0};
                std::fill(nqp_samples.begin(), nqp_samples.end(), 0);
                for (int k = 0; k < n_pulses && !st.flagged; ++k) {
                    advance(st, pulse_times[k], &sampler);
                    pre_pulse[k] = st.qubit == QubitLevel::excited ? 1 : 0;
                    if (st.rng.uniform() < flip_prob)
                        st.qubit = st.qubit == QubitLevel::excited ? QubitLevel::ground
                                                                   : QubitLevel::excited;
                }
                double trial_nqp_probe = 0, trial_excess = 0;
                long long trial_qp_count = 0;
                if (!st.flagged) {
                    advance(st, probe_time, &sampler);
                    pre_pulse[n_pulses] = st.qubit == QubitLevel::excited ? 1 : 0;
                    // The probe acts on a reset qubit (ideal single-shot reset
                    // followed by a pi-pulse), so the recorded decay is not
                    // conditioned on the qubit's pumping history.
                    st.qubit = QubitLevel::excited;
                    trial_nqp_probe = static_cast<double>(st.qp_energy_ghz.size());
                    trial_qp_count = static_cast<long long>(st.qp_energy_ghz.size());
                    for (double e : st.qp_energy_ghz) trial_excess += e;
                }
                bool flagged = st.flagged;
                if (!flagged) {
                    // Each readout delay decays the qubit against the bath
                    // snapshot taken at the probe (arrivals, exits and
                    // excitation paused): number fluctuations enter across
                    // trials, not within a readout, which is the regime the
                    // closed-form decay law assumes.
                    for (std::size_t j = 0; j < n_delays && !flagged; ++j) {
                        TrialState cont = st;
                        cont.rng = Philox4x32(seed, stream, static_cast<std::uint32_t>(1 + j));
                        advance(cont, readout_abs[j], nullptr, /*frozen_bath=*/true);
                        flagged = cont.flagged;
                        outcomes[j] = cont.qubit == QubitLevel::excited ? 1 : 0;
                    }
                }
                if (flagged) {
                    ++acc.flagged;
                    continue;
                }
                ++acc.valid;
                for (std::size_t j = 0; j < n_delays; ++j) acc.readout_counts[j] += outcomes[j];
                for (int g = 0; g < grid_points; ++g) acc.nqp_sums[g] += nqp_samples[g];
                for (int k = 0; k <= n_pulses; ++k) acc.pre_pulse_counts[k] += pre_pulse[k];
                acc.nqp_probe_sum += trial_nqp_probe;
                acc.excess_energy_sum += trial_excess;
                acc.qp_at_probe += trial_qp_count;
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(resolved_threads(), static_cast<int>(n_chunks)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Reduce in chunk order.
    ProtocolResult res;
    std::vector<long> counts(n_delays, 0);
    std::vector<long long> nqp_sums(grid_points, 0);
    std::vector<long> pre_counts(n_pulses + 1, 0);
    double nqp_probe_sum = 0, excess_sum = 0;
    long long qp_at_probe = 0;
    long valid = 0, flagged = 0;
    for (const auto& acc : chunks) {
        for (std::size_t j = 0; j < n_delays; ++j) counts[j] += acc.readout_counts[j];
        for (int g = 0; g < grid_points; ++g) nqp_sums[g] += acc.nqp_sums[g];
        for (int k = 0; k <= n_pulses; ++k) pre_counts[k] += acc.pre_pulse_counts[k];
        nqp_probe_sum += acc.nqp_probe_sum;
        excess_sum += acc.excess_energy_sum;
        qp_at_probe += acc.qp_at_probe;
        valid += acc.valid;
        flagged += acc.flagged;
    }
    if (valid == 0) throw std::runtime_error("run_protocol: every trial was flagged");

    res.trace.delays_us = seq.readout_grid_us;
    res.trace.populations.resize(n_delays);
    res.trace.stderrs.resize(n_delays);
    res.trace.n_trials = valid;
    for (std::size_t j = 0; j < n_delays; ++j) {
        const double p = static_cast<double>(counts[j]) / static_cast<double>(valid);
        res.trace.populations[j] = p;
        res.trace.stderrs[j] = std::sqrt(std::max(0.0, p * (1.0 - p) / static_cast<double>(valid)));
    }
    res.nqp_grid_us.resize(grid_points);
    res.nqp_vs_time.resize(grid_points);
    for (int g = 0; g < grid_points; ++g) {
        res.nqp_grid_us[g] = grid_abs[g] - warmup_us;
        res.nqp_vs_time[g] = static_cast<double>(nqp_sums[g]) / static_cast<double>(valid);
    }
    res.pre_pulse_population.resize(n_pulses + 1);
    for (int k = 0; k <= n_pulses; ++k)
        res.pre_pulse_population[k] = static_cast<double>(pre_counts[k]) / static_cast<double>(valid);
    res.mean_nqp_at_probe = nqp_probe_sum / static_cast<double>(valid);
    res.mean_excess_energy_at_probe =
        qp_at_probe > 0 ? excess_sum / static_cast<double>(qp_at_probe) : 0.0;
    res.flagged_trials = flagged;
    res.valid_trials = valid;

    if (opts_.trace_blocks > 0) {
        res.per_trace_population.assign(opts_.trace_blocks, std::vector<double>(n_delays, 0.0));
        for (long c = 0; c < n_chunks; ++c) {
            const auto& acc = chunks[c];
            for (std::size_t j = 0; j < n_delays; ++j)
                res.per_trace_population[c][j] =
                    acc.valid > 0
                        ? static_cast<double>(acc.readout_counts[j]) / static_cast<double>(acc.valid)
                        : 0.0;
        }
    }
    return res;
}

RecoveryResult Engine::recovery_experiment(const PulseSequence& base,
                                           std::vector<double> probe_delays_us, long n_trials,
                                           std::uint64_t seed, const FitOptions& fit_opts) const {
    if (probe_delays_us.size() < 4)
        throw std::invalid_argument("recovery_experiment: need at least 4 probe delays");
    for (std::size_t i = 1; i < probe_delays_us.size(); ++i)
        if (!(probe_delays_us[i] > probe_delays_us[i - 1]))
            throw std::invalid_argument("recovery_experiment: probe delays must increase");

    RecoveryResult out;
    std::vector<double> delays, n_avgs;
    for (std::size_t idx = 0; idx < probe_delays_us.size(); ++idx) {
        PulseSequence seq = base;
        seq.probe_delay_us = probe_delays_us[idx];
        const auto res = run_protocol(seq, n_trials, seed,
                                      static_cast<std::uint64_t>(idx) * static_cast<std::uint64_t>(n_trials));
        out.flagged_trials += res.flagged_trials;
        const DecayTrace norm = normalized_to_first(res.trace);
        RecoveryPoint pt;
        pt.t_delay_us = probe_delays_us[idx];
        const FitResult fit = fit_decay(norm, fit_opts);
        pt.n_avg = fit.params.n_avg;
        pt.n_avg_err = fit.param_stderr[0];
        pt.t1qp_us = fit.params.t1qp_us;
        pt.fit_converged = fit.converged;
        out.points.push_back(pt);
        delays.push_back(pt.t_delay_us);
        n_avgs.push_back(pt.n_avg);
    }
    out.fit = fit_recovery(delays, n_avgs);
    return out;
}

}  // namespace qpump
