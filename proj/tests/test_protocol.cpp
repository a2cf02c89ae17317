#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "qpburst/errors.hpp"
#include "qpburst/protocol.hpp"

using namespace qpburst;

TEST_CASE("sampling period is derived from the cycle segments") {
    ProtocolConfig p;
    CHECK(p.sampling_period_us() == doctest::Approx(73.6).epsilon(1e-12));

    const auto q = ProtocolConfig::with_sampling_period(67.6);
    CHECK(q.sampling_period_us() == doctest::Approx(67.6).epsilon(1e-12));
    CHECK(q.wait_us == 5.0);
    CHECK(q.cooldown_us == doctest::Approx(58.55).epsilon(1e-12));

    const auto r = ProtocolConfig::with_sampling_period(39.8);
    CHECK(r.cooldown_us == doctest::Approx(30.75).epsilon(1e-12));
}

TEST_CASE("protocol validation rejects broken timings") {
    ProtocolConfig p;
    p.wait_us = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);

    CHECK_THROWS_AS(ProtocolConfig::with_sampling_period(0.5), ConfigError);
    CHECK_THROWS_AS(ProtocolConfig::with_sampling_period(1500.0), ConfigError);
    // cooldown would come out negative
    CHECK_THROWS_AS(ProtocolConfig::with_sampling_period(8.0), ConfigError);
}

TEST_CASE("qubit model validation") {
    QubitModel q;
    q.reset_fidelity = 1.5;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q = QubitModel{};
    q.misid_g_to_e = -0.1;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q = QubitModel{};
    q.baseline_t1_us = 0.0;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q = QubitModel{};
    q.leakage_prob_f = 0.2;
    q.leakage_dwell_cycles = 0;
    CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("environment validation") {
    RadiationEnvironment env;
    env.impact_rate_per_s = -1.0;
    CHECK_THROWS_AS(env.validate(), ConfigError);
    env = RadiationEnvironment{};
    env.tau_rec_us = 0.0;
    CHECK_THROWS_AS(env.validate(), ConfigError);
}

TEST_CASE("stationary ground probability closed form") {
    QubitModel q;  // T1 80, misids 0.05, fidelity 0.99
    CHECK(q.stationary_ground_probability(5.0) ==
          doctest::Approx(0.147293079312).epsilon(1e-9));
    q.reset_fidelity = 1.0;
    CHECK(q.stationary_ground_probability(5.0) ==
          doctest::Approx(0.146801831294).epsilon(1e-9));
}

TEST_CASE("decay and burst helpers") {
    CHECK(expected_ground_probability(80.0, 5.0) ==
          doctest::Approx(0.0605869371865).epsilon(1e-9));
    CHECK(burst_zero_count(1.5, 40.0) == doctest::Approx(37.0));
    CHECK(burst_zero_count(1.5, 74.0) == doctest::Approx(20.0));
    CHECK_THROWS_AS(burst_zero_count(1.5, 0.0), DomainError);
    CHECK_THROWS_AS(burst_zero_count(-1.0, 40.0), DomainError);
    CHECK_THROWS_AS(expected_ground_probability(0.0, 5.0), DomainError);
}

namespace {

Simulator make_sim(std::uint64_t seed, double rate = 0.0) {
    RadiationEnvironment env;
    env.impact_rate_per_s = rate;
    return Simulator(ProtocolConfig{}, QubitModel{}, env, seed);
}

}  // namespace

TEST_CASE("binary traces are deterministic and prefix-stable") {
    const auto sim = make_sim(11);
    const TruthLog truth;
    const auto a = sim.binary_trace(truth, 0);
    const auto b = sim.binary_trace(truth, 0);
    CHECK(a.bits == b.bits);

    // a shorter generation of the same trace is a prefix of the full one
    std::vector<std::uint8_t> head(1000);
    sim.generate_binary(truth, 0, head.size(), head.data());
    CHECK(std::equal(head.begin(), head.end(), a.bits.begin()));

    // distinct traces and distinct seeds differ
    const auto c = sim.binary_trace(truth, 1);
    CHECK(a.bits != c.bits);
    const auto d = make_sim(12).binary_trace(truth, 0);
    CHECK(a.bits != d.bits);
}

TEST_CASE("measured ground fraction matches the stationary closed form") {
    const auto sim = make_sim(21);
    const auto tr = sim.binary_trace(TruthLog{}, 0);
    const double expect = QubitModel{}.stationary_ground_probability(5.0);
    // sigma = sqrt(p(1-p)/1e6) ~ 3.5e-4; allow slack for readback correlations
    CHECK(tr.ground_fraction() == doctest::Approx(expect).epsilon(0.015));
}

TEST_CASE("leakage reduces the measured ground fraction") {
    QubitModel leaky;
    leaky.leakage_prob_f = 0.05;
    const Simulator sim(ProtocolConfig{}, leaky, RadiationEnvironment{}, 3);
    const Simulator ref(ProtocolConfig{}, QubitModel{}, RadiationEnvironment{}, 3);
    const double leaked = sim.binary_trace(TruthLog{}, 0).ground_fraction();
    const double clean = ref.binary_trace(TruthLog{}, 0).ground_fraction();
    CHECK(leaked < clean - 0.01);
}

TEST_CASE("iq traces are deterministic with a dominant excited cluster") {
    const auto sim = make_sim(31);
    const auto tr = sim.iq_trace(TruthLog{}, 0, 200000);
    CHECK(tr.size() == 200000);
    CHECK(tr.iq.size() == 400000);
    const auto again = sim.iq_trace(TruthLog{}, 0, 200000);
    CHECK(tr.iq == again.iq);

    double mean_i = 0.0;
    for (std::size_t k = 0; k < tr.iq.size(); k += 2) mean_i += tr.iq[k];
    mean_i /= static_cast<double>(tr.size());
    // ~85% excited at I=2.8, ~15% ground at I=0
    CHECK(mean_i > 2.0);
    CHECK(mean_i < 2.7);
}

TEST_CASE("impact draws follow the configured poisson rate") {
    const double rate = 0.042;
    const std::uint64_t n_cycles = 1000000;  // 73.6 s at the default period
    std::uint64_t total = 0;
    std::vector<double> lnmag;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto sim = make_sim(seed, rate);
        const auto truth = sim.draw_impacts(n_cycles);
        total += truth.impacts.size();
        for (const auto& imp : truth.impacts) {
            REQUIRE(imp.time_s >= 0.0);
            REQUIRE(imp.time_s <= n_cycles * 73.6e-6);
            REQUIRE(imp.magnitude > 0.0);
            REQUIRE(imp.last_cycle >= imp.first_cycle);
            REQUIRE(imp.last_cycle < n_cycles);
            lnmag.push_back(std::log(imp.magnitude));
        }
        // deterministic redraw
        CHECK(sim.draw_impacts(n_cycles).impacts.size() == truth.impacts.size());
    }
    // expected count 100 * rate * 73.6 = 309; allow 5 sigma
    CHECK(total > 309 - 5 * 18);
    CHECK(total < 309 + 5 * 18);

    // magnitudes are lognormal with median 1 and ln-sigma 2
    double s1 = 0.0, s2 = 0.0;
    for (const double v : lnmag) {
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / lnmag.size();
    const double sd = std::sqrt(s2 / lnmag.size() - mean * mean);
    CHECK(std::abs(mean) < 0.5);
    CHECK(sd == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("impact cycle spans map onto the wait windows") {
    const auto sim = make_sim(77, 0.1);
    const auto truth = sim.draw_impacts(1000000);
    REQUIRE(!truth.impacts.empty());
    const double ts = 73.6, pi = 0.05;
    for (const auto& imp : truth.impacts) {
        const double t_us = imp.time_s * 1e6;
        const auto first = static_cast<std::uint64_t>(
            std::max(0.0, std::ceil((t_us - pi) / ts)));
        CHECK(imp.first_cycle == std::min<std::uint64_t>(first, 999999));
    }
}

TEST_CASE("a strong impact produces a dense run of ground readings") {
    const auto sim = make_sim(5);
    TruthLog truth;
    // solid burst: 10x the usual added rate, placed mid trace
    truth.impacts.push_back({0.01, 10.0, 0, 0});
    const double ts = 73.6, pi = 0.05;
    const auto first =
        static_cast<std::uint64_t>(std::ceil((0.01 * 1e6 - pi) / ts));
    truth.impacts[0].first_cycle = first;
    truth.impacts[0].last_cycle = first + 200;

    const auto tr = sim.binary_trace(truth, 0);
    auto zeros_in = [&](std::uint64_t from, std::uint64_t span) {
        std::uint64_t z = 0;
        for (std::uint64_t i = from; i < from + span; ++i) z += (tr.bits[i] == 0);
        return z;
    };
    // the 27 cycles after the impact sit within two recovery constants
    CHECK(zeros_in(first, 27) >= 18);
    // a window far away stays at the stationary level
    CHECK(zeros_in(first + 100000, 27) <= 13);
}

TEST_CASE("bursts affect every later trace through the accumulator seed") {
    const auto sim = make_sim(6);
    TruthLog truth;
    // impact late in trace 0; its tail reaches into trace 1
    const double ts = 73.6;
    const double t_s = (1000000.0 - 3.0) * ts * 1e-6;  // three cycles before the boundary
    const auto first = static_cast<std::uint64_t>(std::ceil((t_s * 1e6 - 0.05) / ts));
    truth.impacts.push_back({t_s, 10.0, first, first + 100});

    const auto with = sim.binary_trace(truth, 1, 1000);
    const auto without = sim.binary_trace(TruthLog{}, 1, 1000);
    std::uint64_t zw = 0, zo = 0;
    for (std::size_t i = 0; i < 30; ++i) {
        zw += (with.bits[i] == 0);
        zo += (without.bits[i] == 0);
    }
    CHECK(zw > zo);
    CHECK(zw >= 20);
}
