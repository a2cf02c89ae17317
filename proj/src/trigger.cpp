#include "qpburst/trigger.hpp"

#include "qpburst/errors.hpp"

namespace qpburst {

void TriggerConfig::validate() const {
    if (n_consecutive < 2) throw ConfigError("trigger: n_consecutive must be >= 2");
    if (dead_time < 0) throw ConfigError("trigger: dead_time must be >= 0");
    if (control_span <= 0 || signal_pre < 0 || signal_post <= 0)
        throw ConfigError("trigger: window spans must be positive");
    if (control_span + signal_pre + signal_post != window_total)
        throw ConfigError("trigger: control_span + signal_pre + signal_post != window_total");
    if (n_consecutive > signal_post)
        throw ConfigError("trigger: n_consecutive cannot exceed signal_post");
}

const char* to_string(Disposition d) {
    switch (d) {
        case Disposition::pending: return "pending";
        case Disposition::accepted: return "accepted";
        case Disposition::low_signal: return "low-signal";
        case Disposition::control_noise: return "control-noise";
    }
    return "unknown";
}

std::vector<TriggeredEvent> scan_triggers(const std::uint8_t* bits, std::uint64_t n,
                                          std::uint64_t trace_index, const TriggerConfig& cfg) {
    cfg.validate();
    std::vector<TriggeredEvent> events;
    if (n == 0) return events;

    const std::uint64_t nc = static_cast<std::uint64_t>(cfg.n_consecutive);
    const std::uint64_t min_t = static_cast<std::uint64_t>(cfg.min_trigger_index());
    const std::uint64_t post = static_cast<std::uint64_t>(cfg.signal_post);

    std::uint64_t zrun = 0;     // consecutive zeros ending at the current sample
    std::uint64_t resume = 0;   // first index allowed to trigger (dead time)

    for (std::uint64_t i = 0; i < n; ++i) {
        if (bits[i] != 0) {
            zrun = 0;
            continue;
        }
        ++zrun;
        if (zrun < nc) continue;

        const std::uint64_t t = i - nc + 1;
        if (t < resume) continue;
        // edge candidates are skipped without consuming dead time
        if (t < min_t || t + post > n) continue;

        TriggeredEvent ev;
        ev.trace_index = trace_index;
        ev.t = t;
        const std::uint64_t w0 = t - min_t;  // window start = control start
        ev.snapshot.assign(bits + w0, bits + w0 + cfg.window_total);
        for (int k = 0; k < cfg.control_span; ++k) ev.n_control += ev.snapshot[k] == 0;
        for (int k = cfg.control_span; k < cfg.window_total; ++k)
            ev.n_signal += ev.snapshot[k] == 0;
        events.push_back(std::move(ev));

        resume = t + static_cast<std::uint64_t>(cfg.dead_time) + 1;
    }
    return events;
}

std::vector<TriggeredEvent> scan_triggers(const BinaryTrace& binary, const TriggerConfig& cfg) {
    return scan_triggers(binary.bits.data(), binary.size(), binary.parent_index, cfg);
}

}  // namespace qpburst
