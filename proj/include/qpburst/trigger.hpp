#pragma once

#include <cstdint>
#include <vector>

#include "qpburst/trace.hpp"

namespace qpburst {

// Window geometry of the consecutive-zero trigger. All spans are in samples.
struct TriggerConfig {
    int n_consecutive = 4;  // zeros required to fire
    int window_total = 145;
    int control_span = 105;
    int signal_pre = 5;    // signal samples before the trigger index
    int signal_post = 35;  // signal samples starting at the trigger index
    int dead_time = 35;    // samples after t in which re-triggering is blocked

    int signal_span() const { return signal_pre + signal_post; }
    // earliest trigger index with a full control window available
    int min_trigger_index() const { return control_span + signal_pre; }

    void validate() const;  // throws ConfigError
};

enum class Disposition : std::uint8_t {
    pending,
    accepted,
    low_signal,     // N_signal below threshold
    control_noise,  // N_control outside the accepted band
};

const char* to_string(Disposition d);

// One captured window: control region [t-110, t-6], signal region [t-5, t+34]
// at default geometry, plus the raw 145-sample snapshot.
struct TriggeredEvent {
    std::uint64_t trace_index = 0;
    std::uint64_t t = 0;  // trigger index within the trace (first zero of the run)
    int n_control = 0;
    int n_signal = 0;
    std::vector<std::uint8_t> snapshot;  // window_total samples, control first
    Disposition disposition = Disposition::pending;

    std::uint64_t absolute_index() const { return trace_index * kTraceLength + t; }
};

// Single left-to-right pass over one binary trace. A trigger fires at the
// first index t >= the dead-time resume point with n_consecutive zeros and a
// full window inside the trace; edge candidates are skipped without consuming
// dead time. Constant memory apart from the returned events.
std::vector<TriggeredEvent> scan_triggers(const BinaryTrace& binary, const TriggerConfig& cfg);

// Same contract on a raw sample span (used internally and by tests).
std::vector<TriggeredEvent> scan_triggers(const std::uint8_t* bits, std::uint64_t n,
                                          std::uint64_t trace_index, const TriggerConfig& cfg);

}  // namespace qpburst
