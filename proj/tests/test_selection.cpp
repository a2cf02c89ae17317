#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "qpburst/errors.hpp"
#include "qpburst/selection.hpp"

#if QPBURST_HAVE_GMP
#include <gmpxx.h>
#endif

using namespace qpburst;

namespace {

struct TableRow {
    double ts_us;
    double p_g;
    int n_signal;
    int ctrl_lo;
    int ctrl_hi;
};

// Published thresholds of the 21 analysis runs (sampling period, measured
// P(g), N_signal_min, control band).
const std::vector<TableRow> kRuns = {
    {73.6, 0.118, 19, 6, 21},  {67.6, 0.145, 21, 8, 24}, {67.6, 0.138, 21, 7, 23},
    {67.6, 0.155, 22, 9, 25},  {67.6, 0.149, 21, 8, 25}, {60.0, 0.147, 21, 8, 23},
    {60.0, 0.158, 22, 9, 24},  {60.0, 0.155, 22, 9, 24}, {67.6, 0.142, 21, 8, 23},
    {67.6, 0.143, 21, 8, 24},  {67.6, 0.135, 20, 7, 23}, {73.6, 0.151, 21, 9, 25},
    {73.6, 0.145, 21, 8, 24},  {73.6, 0.142, 21, 8, 23}, {73.6, 0.150, 21, 8, 24},
    {50.0, 0.160, 22, 9, 26},  {50.0, 0.163, 22, 9, 26}, {50.0, 0.176, 23, 11, 28},
    {39.8, 0.158, 22, 9, 25},  {39.8, 0.157, 22, 9, 25}, {39.8, 0.150, 22, 8, 24},
};

}  // namespace

TEST_CASE("binomial pmf and tail frozen values") {
    CHECK(binomial_tail(40, 0.15, 21) ==
          doctest::Approx(3.512720671164643e-8).epsilon(1e-9));
    CHECK(binomial_tail(40, 0.118, 21) ==
          doctest::Approx(4.4084388965683584e-10).epsilon(1e-9));
    CHECK(binomial_tail(40, 0.118, 19) ==
          doctest::Approx(2.5323181873448558e-8).epsilon(1e-9));
    CHECK(binomial_tail(2, 0.5, 2) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(binomial_pmf(105, 0.145, 8) ==
          doctest::Approx(0.013708164329442858).epsilon(1e-9));
    CHECK(binomial_pmf(105, 0.118, 6) ==
          doctest::Approx(0.017351254668336132).epsilon(1e-9));
}

TEST_CASE("binomial edge cases and argument checking") {
    CHECK(binomial_tail(40, 0.15, 0) == 1.0);
    CHECK(binomial_tail(40, 0.0, 0) == 1.0);
    CHECK(binomial_tail(40, 0.0, 1) == 0.0);
    CHECK(binomial_tail(40, 1.0, 40) == 1.0);
    CHECK(binomial_pmf(10, 0.0, 0) == 1.0);
    CHECK(binomial_pmf(10, 1.0, 10) == 1.0);
    CHECK(binomial_pmf(10, 0.0, 3) == 0.0);

    // an impossible count has zero tail and zero pmf
    CHECK(binomial_tail(40, 0.1, 41) == 0.0);
    CHECK(binomial_pmf(10, 0.5, 11) == 0.0);

    CHECK_THROWS_AS(binomial_tail(40, -0.1, 3), DomainError);
    CHECK_THROWS_AS(binomial_tail(40, 1.1, 3), DomainError);
    CHECK_THROWS_AS(binomial_tail(40, 0.1, -1), DomainError);
    CHECK_THROWS_AS(binomial_tail(-1, 0.1, 0), DomainError);
}

TEST_CASE("tail is monotone in threshold and in probability") {
    for (int k = 1; k <= 40; ++k)
        CHECK(binomial_tail(40, 0.15, k) < binomial_tail(40, 0.15, k - 1));
    for (double p = 0.05; p < 0.5; p += 0.05)
        CHECK(binomial_tail(40, p, 15) < binomial_tail(40, p + 0.05, 15));
    // pmf sums to one
    double sum = 0.0;
    for (int k = 0; k <= 40; ++k) sum += binomial_pmf(40, 0.15, k);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

#if QPBURST_HAVE_GMP
namespace {

// Exact tails for every threshold k at once, via rational arithmetic;
// p enters as the exact dyadic rational of its double representation, so
// both computations target the same number.
std::vector<double> exact_tails(int n, double p) {
    const mpq_class q(p);
    const mpq_class r = 1 - q;
    std::vector<mpq_class> pow_p(n + 1), pow_r(n + 1);
    pow_p[0] = 1;
    pow_r[0] = 1;
    for (int i = 1; i <= n; ++i) {
        pow_p[i] = pow_p[i - 1] * q;
        pow_r[i] = pow_r[i - 1] * r;
    }
    std::vector<double> tails(n + 1);
    mpq_class suffix = 0;
    for (int i = n; i >= 0; --i) {
        mpz_class c;
        mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(n),
                     static_cast<unsigned long>(i));
        suffix += mpq_class(c) * pow_p[i] * pow_r[n - i];
        tails[i] = suffix.get_d();
    }
    return tails;
}

}  // namespace

TEST_CASE("log-space tail matches exact rational arithmetic to 1e-6") {
    const double ps[] = {0.05, 0.118, 0.15, 0.176, 0.3};
    for (int n = 1; n <= 60; ++n) {
        for (const double p : ps) {
            const auto exact = exact_tails(n, p);
            for (int k = 0; k <= n; ++k) {
                const double got = binomial_tail(n, p, k);
                if (exact[k] == 0.0) {
                    CHECK(got == 0.0);
                } else {
                    CHECK(std::abs(got - exact[k]) / exact[k] < 1e-6);
                }
            }
        }
    }
}
#endif  // QPBURST_HAVE_GMP

TEST_CASE("signal thresholds fall within one count of the published runs") {
    const SelectionConfig cfg;
    for (const auto& row : kRuns) {
        const int n = compute_signal_threshold(row.p_g, row.ts_us, cfg);
        CHECK(std::abs(n - row.n_signal) <= 1);
    }
    // representative values pinned exactly
    CHECK(compute_signal_threshold(0.118, 73.6, cfg) == 20);
    CHECK(compute_signal_threshold(0.145, 67.6, cfg) == 22);
}

TEST_CASE("signal threshold floors, saturation and errors") {
    const SelectionConfig cfg;
    CHECK(compute_signal_threshold(0.0, 73.6, cfg) == cfg.n_consecutive);
    CHECK(compute_signal_threshold(1e-6, 73.6, cfg) == cfg.n_consecutive);
    // a noisy channel can never reach the target rate inside the window
    CHECK_THROWS_AS(compute_signal_threshold(0.9, 73.6, cfg), SaturationError);
    CHECK_THROWS_AS(compute_signal_threshold(-0.1, 73.6, cfg), DomainError);
    CHECK_THROWS_AS(compute_signal_threshold(0.15, 0.0, cfg), DomainError);

    // threshold grows with P(g)
    CHECK(compute_signal_threshold(0.118, 73.6, cfg) <=
          compute_signal_threshold(0.176, 73.6, cfg));
}

TEST_CASE("trigger-conditioned thresholds never exceed the unconditioned ones") {
    SelectionConfig cond;
    cond.trigger_conditioned = true;
    const SelectionConfig plain;
    for (const auto& row : kRuns) {
        const int a = compute_signal_threshold(row.p_g, row.ts_us, cond);
        const int b = compute_signal_threshold(row.p_g, row.ts_us, plain);
        CHECK(a <= b);
        CHECK(a >= cond.n_consecutive);
    }
}

TEST_CASE("control bands fall within one count of the published runs") {
    const SelectionConfig cfg;
    for (const auto& row : kRuns) {
        const auto [lo, hi] = compute_control_bounds(row.p_g, cfg);
        CHECK(std::abs(lo - row.ctrl_lo) <= 1);
        CHECK(std::abs(hi - row.ctrl_hi) <= 1);
        CHECK(lo <= hi);
        // the band is exactly the PMF super-threshold set
        for (int k = lo; k <= hi; ++k)
            CHECK(binomial_pmf(cfg.control_window, row.p_g, k) >= cfg.control_pmf_cut);
        if (lo > 0)
            CHECK(binomial_pmf(cfg.control_window, row.p_g, lo - 1) < cfg.control_pmf_cut);
        CHECK(binomial_pmf(cfg.control_window, row.p_g, hi + 1) < cfg.control_pmf_cut);
    }
    CHECK(compute_control_bounds(0.145, cfg) == std::pair<int, int>(8, 23));
    CHECK(compute_control_bounds(0.118, cfg) == std::pair<int, int>(5, 20));
}

TEST_CASE("degenerate control cuts are rejected") {
    SelectionConfig cfg;
    cfg.control_pmf_cut = 1.0;  // no count can reach a PMF of one
    CHECK_THROWS_AS(compute_control_bounds(0.145, cfg), DegeneracyError);
    CHECK_THROWS_AS(compute_control_bounds(0.0, SelectionConfig{}), DomainError);
    CHECK_THROWS_AS(compute_control_bounds(1.0, SelectionConfig{}), DomainError);

    SelectionConfig bad;
    bad.control_pmf_cut = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SelectionConfig{};
    bad.noise_rate_target = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SelectionConfig{};
    bad.n_consecutive = 50;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("combined thresholds carry the achieved noise rate") {
    const SelectionConfig cfg;
    const auto thr = compute_thresholds(0.147, 73.6, cfg);
    CHECK(thr.p_g == 0.147);
    CHECK(thr.ts_us == 73.6);
    CHECK(thr.n_signal_min >= cfg.n_consecutive);
    CHECK(thr.achieved_noise_rate > 0.0);
    CHECK(thr.achieved_noise_rate < cfg.noise_rate_target);
    // consistency with the component functions
    CHECK(thr.n_signal_min == compute_signal_threshold(0.147, 73.6, cfg));
    const auto [lo, hi] = compute_control_bounds(0.147, cfg);
    CHECK(thr.n_control_min == lo);
    CHECK(thr.n_control_max == hi);
}

TEST_CASE("event selection stamps dispositions and tallies") {
    SelectionThresholds thr;
    thr.n_signal_min = 20;
    thr.n_control_min = 8;
    thr.n_control_max = 24;

    auto make = [](int nc, int ns) {
        TriggeredEvent ev;
        ev.n_control = nc;
        ev.n_signal = ns;
        return ev;
    };
    std::vector<TriggeredEvent> events = {
        make(15, 25),  // accepted
        make(15, 19),  // low signal
        make(30, 25),  // control noise
        make(7, 2),    // fails both; the control cut wins
        make(8, 20),   // boundary accepted
        make(24, 20),  // boundary accepted
    };
    const auto stats = select_events(events, thr);
    CHECK(stats.n_input == 6);
    CHECK(stats.n_accepted == 3);
    CHECK(stats.n_low_signal == 1);
    CHECK(stats.n_control_noise == 2);
    CHECK(events[0].disposition == Disposition::accepted);
    CHECK(events[1].disposition == Disposition::low_signal);
    CHECK(events[2].disposition == Disposition::control_noise);
    CHECK(events[3].disposition == Disposition::control_noise);
    CHECK(events[4].disposition == Disposition::accepted);
    CHECK(events[5].disposition == Disposition::accepted);

    std::vector<TriggeredEvent> empty;
    const auto zero = select_events(empty, thr);
    CHECK(zero.n_input == 0);
    CHECK(zero.n_accepted == 0);
}
