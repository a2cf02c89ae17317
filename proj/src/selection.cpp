#include "qpburst/selection.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qpburst/errors.hpp"

namespace qpburst {

namespace {

// log C(n,k) + k log p + (n-k) log(1-p); requires 0 < p < 1
double log_pmf(int n, double p, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
           k * std::log(p) + (n - k) * std::log1p(-p);
}

void check_args(int n, double p, int k) {
    if (n < 0) throw DomainError("binomial: n must be >= 0");
    if (k < 0) throw DomainError("binomial: k must be >= 0");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: p must lie in [0, 1]");
}

}  // namespace

double binomial_pmf(int n, double p, int k) {
    check_args(n, p, k);
    if (k > n) return 0.0;  // an impossible count has zero probability
    if (p == 0.0) return k == 0 ? 1.0 : 0.0;
    if (p == 1.0) return k == n ? 1.0 : 0.0;
    return std::exp(log_pmf(n, p, k));
}

double binomial_tail(int n, double p, int k) {
    check_args(n, p, k);
    if (k > n) return 0.0;  // an impossible count has zero tail
    if (k == 0) return 1.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    // factor out the largest term so the sum stays in range for deep tails
    std::vector<double> lt(n - k + 1);
    double m = -1e300;
    for (int j = k; j <= n; ++j) {
        lt[j - k] = log_pmf(n, p, j);
        m = std::max(m, lt[j - k]);
    }
    double s = 0.0;
    for (const double v : lt) s += std::exp(v - m);
    return std::exp(m) * s;
}

void SelectionConfig::validate() const {
    if (signal_window < 1 || control_window < 1)
        throw ConfigError("selection: window sizes must be positive");
    if (n_consecutive < 2 || n_consecutive > signal_window)
        throw ConfigError("selection: n_consecutive must lie in [2, signal_window]");
    if (noise_rate_target <= 0.0)
        throw ConfigError("selection: noise_rate_target must be positive");
    if (control_pmf_cut <= 0.0 || control_pmf_cut > 1.0)
        throw ConfigError("selection: control_pmf_cut must lie in (0, 1]");
}

int compute_signal_threshold(double p_g, double ts_us, const SelectionConfig& cfg) {
    cfg.validate();
    if (p_g < 0.0 || p_g > 1.0) throw DomainError("signal threshold: P(g) must lie in [0, 1]");
    if (ts_us <= 0.0) throw DomainError("signal threshold: T_S must be positive");
    if (p_g == 0.0) return cfg.n_consecutive;

    const double ts_s = ts_us * 1e-6;
    const int nw = cfg.signal_window;
    for (int n = 0; n <= nw; ++n) {
        double rate;
        if (cfg.trigger_conditioned) {
            // trigger rate ~ P(g)^nc / T_S, times the chance the remaining
            // signal samples bring the window total up to n
            const double trig = std::pow(p_g, cfg.n_consecutive) / ts_s;
            const int rest = nw - cfg.n_consecutive;
            const int need = std::max(0, n - cfg.n_consecutive);
            rate = need > rest ? 0.0 : trig * binomial_tail(rest, p_g, need);
        } else {
            rate = binomial_tail(nw, p_g, n) / ts_s;
        }
        if (rate < cfg.noise_rate_target) return std::max(cfg.n_consecutive, n);
    }
    throw SaturationError("signal threshold: no N_signal_min meets the noise target");
}

std::pair<int, int> compute_control_bounds(double p_g, const SelectionConfig& cfg) {
    cfg.validate();
    if (p_g <= 0.0 || p_g >= 1.0)
        throw DomainError("control bounds: P(g) must lie in (0, 1)");

    const int n = cfg.control_window;
    int lo = -1, hi = -1;
    for (int k = 0; k <= n; ++k) {
        if (binomial_pmf(n, p_g, k) >= cfg.control_pmf_cut) {
            if (lo < 0) lo = k;
            hi = k;
        }
    }
    if (lo < 0)
        throw DegeneracyError("control bounds: cut accepts no control count");
    // the binomial PMF is unimodal, so the accepted set is an interval
    for (int k = lo; k <= hi; ++k)
        if (binomial_pmf(n, p_g, k) < cfg.control_pmf_cut)
            throw DegeneracyError("control bounds: accepted set is not contiguous");
    return {lo, hi};
}

SelectionThresholds compute_thresholds(double p_g, double ts_us, const SelectionConfig& cfg) {
    SelectionThresholds thr;
    thr.config = cfg;
    thr.p_g = p_g;
    thr.ts_us = ts_us;
    thr.n_signal_min = compute_signal_threshold(p_g, ts_us, cfg);
    const auto [lo, hi] = compute_control_bounds(p_g, cfg);
    thr.n_control_min = lo;
    thr.n_control_max = hi;
    thr.achieved_noise_rate =
        p_g > 0.0 ? binomial_tail(cfg.signal_window, p_g, thr.n_signal_min) / (ts_us * 1e-6)
                  : 0.0;
    return thr;
}

SelectionStats select_events(std::vector<TriggeredEvent>& events,
                             const SelectionThresholds& thr) {
    SelectionStats stats;
    stats.n_input = events.size();
    for (auto& ev : events) {
        if (ev.n_control < thr.n_control_min || ev.n_control > thr.n_control_max) {
            ev.disposition = Disposition::control_noise;
            ++stats.n_control_noise;
        } else if (ev.n_signal < thr.n_signal_min) {
            ev.disposition = Disposition::low_signal;
            ++stats.n_low_signal;
        } else {
            ev.disposition = Disposition::accepted;
            ++stats.n_accepted;
        }
    }
    return stats;
}

}  // namespace qpburst
