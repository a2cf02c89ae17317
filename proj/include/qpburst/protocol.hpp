#pragma once

#include <cstdint>
#include <vector>

#include "qpburst/trace.hpp"

namespace qpburst {

// Cycle timing of the fast decay detection protocol. The sampling period is
// derived, never stored, so the invariant T_S = wait + pi + readout + cooldown
// cannot drift.
struct ProtocolConfig {
    double wait_us = 5.0;       // free-decay window the detection relies on
    double pi_pulse_us = 0.05;  // conditional reset pulse
    double readout_us = 4.0;
    double cooldown_us = 64.55;

    double sampling_period_us() const {
        return wait_us + pi_pulse_us + readout_us + cooldown_us;
    }

    // Convenience: fix T_S by absorbing the remainder into the cooldown.
    static ProtocolConfig with_sampling_period(double ts_us, double wait_us = 5.0);

    void validate() const;  // throws ConfigError; T_S sanity range [1, 1000] us
};

// Per-state readout cluster in the I/Q plane (detector units).
struct ClusterGeometry {
    double i_center = 0.0;
    double q_center = 0.0;
    double i_sigma = 1.0;
    double q_sigma = 1.0;
};

struct QubitModel {
    double baseline_t1_us = 80.0;
    double reset_fidelity = 0.99;  // probability the conditional pi-pulse acts
    double misid_g_to_e = 0.05;    // binary-mode readout confusion
    double misid_e_to_g = 0.05;
    double leakage_prob_f = 0.0;   // per-cycle |e> -> |f> probability
    int leakage_dwell_cycles = 3;  // cycles spent in |f> before returning to |e>

    ClusterGeometry g{0.0, 0.0, 1.0, 1.0};
    ClusterGeometry e{2.8, 1.0, 1.0, 1.0};
    ClusterGeometry f{1.2, -2.6, 1.0, 1.0};

    void validate() const;

    // Stationary P(measured ground) of the reset/decay/readout chain with
    // leakage disabled. The conditional pi-pulse reacts to the *measured*
    // outcome, so misidentified ground readings flip a truly excited qubit
    // into |g> and inflate P(g) above the naive decay x readout mixture.
    double stationary_ground_probability(double wait_us) const;
};

struct RadiationEnvironment {
    double impact_rate_per_s = 0.0;  // homogeneous Poisson arrival rate
    double gamma0_per_us = 1.0;      // added relaxation rate at impact time
    double tau_rec_us = 400.0;       // exponential recovery constant
    // Log-normal spread (ln-sigma) of a per-impact multiplier on gamma0,
    // median 1. Zero gives identical bursts; the default reproduces the
    // order-of-magnitude spread of real deposit energies.
    double magnitude_sigma = 2.0;

    void validate() const;
};

struct Impact {
    double time_s = 0.0;
    double magnitude = 1.0;  // multiplier on gamma0
    std::uint64_t first_cycle = 0;
    std::uint64_t last_cycle = 0;
};

struct TruthLog {
    std::vector<Impact> impacts;
};

// P(g) from pure decay during the wait window: 1 - exp(-wait/T1).
double expected_ground_probability(double t1_us, double wait_us);

// Expected consecutive zeros a solid burst of the given duration produces;
// validation/documentation helper only.
double burst_zero_count(double burst_ms, double ts_us);

enum class StreamMode { binary, iq };

// Stochastic protocol simulator. Immutable after construction; traces are
// generated from per-trace RNG substreams keyed (seed, trace index), so any
// subset may be produced concurrently or out of order with bit-identical
// results. Each trace starts freshly prepared (excited, previous readout
// excited); qubit state does not carry across trace boundaries.
class Simulator {
public:
    Simulator(ProtocolConfig protocol, QubitModel qubit, RadiationEnvironment env,
              std::uint64_t seed);

    // Draws the full impact list for a run of n_cycles from a dedicated
    // substream (independent of every trace substream).
    TruthLog draw_impacts(std::uint64_t n_cycles) const;

    // Generates cycles [trace_index * kTraceLength, + n_cycles) as binary
    // outcomes (one byte per cycle, 0 = measured ground).
    void generate_binary(const TruthLog& truth, std::uint64_t trace_index,
                         std::uint64_t n_cycles, std::uint8_t* out) const;

    // Same chain, emitting interleaved (I, Q) float pairs drawn from the true
    // state's cluster; the conditional reset uses the geometric threshold.
    void generate_iq(const TruthLog& truth, std::uint64_t trace_index,
                     std::uint64_t n_cycles, float* out) const;

    BinaryTrace binary_trace(const TruthLog& truth, std::uint64_t trace_index,
                             std::uint64_t n_cycles = kTraceLength) const;
    Trace iq_trace(const TruthLog& truth, std::uint64_t trace_index,
                   std::uint64_t n_cycles = kTraceLength) const;

    const ProtocolConfig& protocol() const { return protocol_; }
    const QubitModel& qubit() const { return qubit_; }
    const RadiationEnvironment& environment() const { return env_; }
    std::uint64_t seed() const { return seed_; }

private:
    template <typename Emit>
    void run_chain(const TruthLog& truth, std::uint64_t trace_index,
                   std::uint64_t n_cycles, bool iq_mode, Emit&& emit) const;

    ProtocolConfig protocol_;
    QubitModel qubit_;
    RadiationEnvironment env_;
    std::uint64_t seed_;

    // precomputed IQ-mode discrimination geometry (true-model threshold)
    double rot_cos_ = 1.0, rot_sin_ = 0.0;
    double rot_threshold_ = 0.0;
};

}  // namespace qpburst
