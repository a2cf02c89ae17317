#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qpburst/trigger.hpp"

namespace qpburst {

// Statistics of the event-selection cuts.
struct SelectionConfig {
    int signal_window = 40;
    int control_window = 105;
    int n_consecutive = 4;            // floor for N_signal_min
    double noise_rate_target = 1e-4;  // false events/second from qubit decay
    double control_pmf_cut = 0.0075;  // pointwise PMF acceptance cut
    // Alternative noise-rate model: trigger rate times the tail over the
    // remaining signal samples, instead of the unconditioned window tail.
    bool trigger_conditioned = false;

    void validate() const;  // throws ConfigError
};

struct SelectionThresholds {
    int n_signal_min = 0;
    int n_control_min = 0;
    int n_control_max = 0;
    double p_g = 0.0;
    double ts_us = 0.0;
    double achieved_noise_rate = 0.0;  // events/s at the chosen N_signal_min
    SelectionConfig config;
};

// PMF and upper tail P(X >= k) of Binomial(n, p), evaluated in log space so
// deep tails keep full relative accuracy.
double binomial_pmf(int n, double p, int k);
double binomial_tail(int n, double p, int k);

// Smallest N_signal_min whose decay-noise rate P(X >= n)/T_S falls below the
// target, floored at n_consecutive.
int compute_signal_threshold(double p_g, double ts_us, const SelectionConfig& cfg);

// Contiguous band of control counts with pointwise PMF above the cut.
std::pair<int, int> compute_control_bounds(double p_g, const SelectionConfig& cfg);

SelectionThresholds compute_thresholds(double p_g, double ts_us, const SelectionConfig& cfg);

struct SelectionStats {
    std::uint64_t n_input = 0;
    std::uint64_t n_accepted = 0;
    std::uint64_t n_low_signal = 0;
    std::uint64_t n_control_noise = 0;
};

// Applies the cuts in place, stamping each event's disposition. Pure given
// (events, thresholds): dispositions depend on nothing else.
SelectionStats select_events(std::vector<TriggeredEvent>& events,
                             const SelectionThresholds& thr);

}  // namespace qpburst
