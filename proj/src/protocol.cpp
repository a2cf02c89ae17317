#include "qpburst/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpburst/errors.hpp"
#include "qpburst/random.hpp"

namespace qpburst {

namespace {

// Substream reserved for the global impact list; trace substreams use the
// trace index, which never reaches this value in practice.
constexpr std::uint64_t kImpactStream = ~0ull;

// An impact stops counting as "affecting" a cycle once its added relaxation
// rate drops below this fraction of the baseline rate.
constexpr double kAffectedRateFraction = 1e-4;

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

ProtocolConfig ProtocolConfig::with_sampling_period(double ts_us, double wait_us) {
    ProtocolConfig cfg;
    cfg.wait_us = wait_us;
    cfg.cooldown_us = ts_us - wait_us - cfg.pi_pulse_us - cfg.readout_us;
    cfg.validate();
    return cfg;
}

void ProtocolConfig::validate() const {
    require(wait_us > 0.0, "protocol: wait_us must be positive");
    require(pi_pulse_us > 0.0, "protocol: pi_pulse_us must be positive");
    require(readout_us > 0.0, "protocol: readout_us must be positive");
    require(cooldown_us > 0.0, "protocol: cooldown_us must be positive");
    const double ts = sampling_period_us();
    require(ts >= 1.0 && ts <= 1000.0,
            "protocol: sampling period outside the sanity range [1, 1000] us");
}

void QubitModel::validate() const {
    require(baseline_t1_us > 0.0, "qubit: baseline_t1_us must be positive");
    for (const double p : {reset_fidelity, misid_g_to_e, misid_e_to_g, leakage_prob_f})
        require(p >= 0.0 && p <= 1.0, "qubit: probabilities must lie in [0, 1]");
    require(leakage_dwell_cycles >= 1, "qubit: leakage_dwell_cycles must be >= 1");
    require(g.i_sigma > 0.0 && g.q_sigma > 0.0 && e.i_sigma > 0.0 && e.q_sigma > 0.0 &&
                f.i_sigma > 0.0 && f.q_sigma > 0.0,
            "qubit: cluster sigmas must be positive");
    require(g.i_center != e.i_center || g.q_center != e.q_center,
            "qubit: g and e cluster centers must be distinct");
}

double QubitModel::stationary_ground_probability(double wait_us) const {
    // Two-state chain over (true state, measured outcome). With q the decay
    // probability per wait window, F the reset fidelity and m_ge/m_eg the
    // readout confusions, the excited-state occupancy x after the wait obeys
    //   x = (1-q) * [ x*(1 - m_eg*F) + (1-x)*F*(1-m_ge) ]
    // because a measured ground outcome (prob m_eg when truly excited,
    // 1-m_ge when truly ground) triggers a pi-pulse that swaps the states.
    const double q = 1.0 - std::exp(-wait_us / baseline_t1_us);
    const double F = reset_fidelity;
    const double num = (1.0 - q) * F * (1.0 - misid_g_to_e);
    const double den = 1.0 - (1.0 - q) * (1.0 - misid_e_to_g * F) + num;
    const double x = num / den;
    return x * misid_e_to_g + (1.0 - x) * (1.0 - misid_g_to_e);
}

void RadiationEnvironment::validate() const {
    require(impact_rate_per_s >= 0.0, "environment: impact_rate_per_s must be >= 0");
    require(gamma0_per_us >= 0.0, "environment: gamma0_per_us must be >= 0");
    require(tau_rec_us > 0.0, "environment: tau_rec_us must be positive");
    require(magnitude_sigma >= 0.0, "environment: magnitude_sigma must be >= 0");
}

double expected_ground_probability(double t1_us, double wait_us) {
    if (t1_us <= 0.0) throw DomainError("expected_ground_probability: T1 must be positive");
    if (wait_us < 0.0) throw DomainError("expected_ground_probability: wait must be >= 0");
    return 1.0 - std::exp(-wait_us / t1_us);
}

double burst_zero_count(double burst_ms, double ts_us) {
    if (ts_us <= 0.0) throw DomainError("burst_zero_count: sampling period must be positive");
    if (burst_ms < 0.0) throw DomainError("burst_zero_count: burst duration must be >= 0");
    return std::floor(burst_ms * 1000.0 / ts_us);
}

Simulator::Simulator(ProtocolConfig protocol, QubitModel qubit, RadiationEnvironment env,
                     std::uint64_t seed)
    : protocol_(protocol), qubit_(qubit), env_(env), seed_(seed) {
    protocol_.validate();
    qubit_.validate();
    env_.validate();

    // Geometric discrimination used for the conditional reset in IQ mode:
    // rotate so the g->e axis lies along I, then threshold at the point that
    // minimizes the two Gaussian tail misid fractions along that axis.
    const double di = qubit_.e.i_center - qubit_.g.i_center;
    const double dq = qubit_.e.q_center - qubit_.g.q_center;
    const double alpha = std::atan2(dq, di);  // rotation applied is -alpha
    rot_cos_ = std::cos(alpha);
    rot_sin_ = std::sin(alpha);  // rotated I = I*cos(alpha) + Q*sin(alpha)

    auto rotated = [&](const ClusterGeometry& c) {
        const double mu = c.i_center * rot_cos_ + c.q_center * rot_sin_;
        const double var = rot_cos_ * rot_cos_ * c.i_sigma * c.i_sigma +
                           rot_sin_ * rot_sin_ * c.q_sigma * c.q_sigma;
        return std::pair<double, double>(mu, std::sqrt(var));
    };
    const auto [mu_g, sg] = rotated(qubit_.g);
    const auto [mu_e, se] = rotated(qubit_.e);

    if (std::abs(se - sg) < 1e-12 * (se + sg)) {
        rot_threshold_ = 0.5 * (mu_g + mu_e);
    } else {
        // equal-density point between the centers: solve the quadratic from
        // phi((t-mu_g)/sg)/sg = phi((t-mu_e)/se)/se
        const double a = 1.0 / (sg * sg) - 1.0 / (se * se);
        const double b = -2.0 * (mu_g / (sg * sg) - mu_e / (se * se));
        const double c = mu_g * mu_g / (sg * sg) - mu_e * mu_e / (se * se) -
                         2.0 * std::log(se / sg);
        const double disc = b * b - 4.0 * a * c;
        rot_threshold_ = 0.5 * (mu_g + mu_e);
        if (disc >= 0.0) {
            const double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
            const double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
            if (r1 > mu_g && r1 < mu_e) rot_threshold_ = r1;
            else if (r2 > mu_g && r2 < mu_e) rot_threshold_ = r2;
        }
    }
}

TruthLog Simulator::draw_impacts(std::uint64_t n_cycles) const {
    TruthLog log;
    if (env_.impact_rate_per_s <= 0.0 || n_cycles == 0 || env_.gamma0_per_us <= 0.0)
        return log;

    Philox rng(seed_, kImpactStream);
    const double ts_us = protocol_.sampling_period_us();
    const double duration_s = static_cast<double>(n_cycles) * ts_us * 1e-6;
    const std::uint64_t last_cycle_index = n_cycles - 1;

    // added-rate level below which an impact no longer counts as affecting
    const double floor_rate = kAffectedRateFraction / qubit_.baseline_t1_us;

    double t = 0.0;
    while (true) {
        t += rng.next_exp() / env_.impact_rate_per_s;
        if (t >= duration_s) break;

        Impact imp;
        imp.time_s = t;
        imp.magnitude = env_.magnitude_sigma > 0.0
                            ? std::exp(env_.magnitude_sigma * rng.next_gauss())
                            : 1.0;

        const double t_us = t * 1e6;
        const double first = std::ceil((t_us - protocol_.pi_pulse_us) / ts_us);
        imp.first_cycle = static_cast<std::uint64_t>(std::max(0.0, first));

        const double peak = env_.gamma0_per_us * imp.magnitude;
        double span_us = 0.0;
        if (peak > floor_rate)
            span_us = env_.tau_rec_us * std::log(peak / floor_rate);
        const double last = std::floor((t_us + span_us - protocol_.pi_pulse_us) / ts_us);
        imp.last_cycle = static_cast<std::uint64_t>(std::max(first, last));

        imp.first_cycle = std::min(imp.first_cycle, last_cycle_index);
        imp.last_cycle = std::min(imp.last_cycle, last_cycle_index);
        log.impacts.push_back(imp);
    }
    return log;
}

template <typename Emit>
void Simulator::run_chain(const TruthLog& truth, std::uint64_t trace_index,
                          std::uint64_t n_cycles, bool iq_mode, Emit&& emit) const {
    Philox rng(seed_, trace_index);

    const double ts = protocol_.sampling_period_us();
    const double wait = protocol_.wait_us;
    const double base_rate = 1.0 / qubit_.baseline_t1_us;
    const double p_decay_base = 1.0 - std::exp(-wait * base_rate);
    const double recovery_per_cycle = std::exp(-ts / env_.tau_rec_us);
    const double g0 = env_.gamma0_per_us;
    const double tau = env_.tau_rec_us;
    const double leak = qubit_.leakage_prob_f;

    // Burst accumulator: total added relaxation rate at this cycle's wait
    // window. Seeded by a direct fold-in over all earlier impacts so the value
    // is identical whether or not preceding traces were generated.
    double t_wait = static_cast<double>(trace_index * kTraceLength) * ts + protocol_.pi_pulse_us;
    double acc = 0.0;
    std::size_t ip = 0;
    const auto& imps = truth.impacts;
    while (ip < imps.size() && imps[ip].time_s * 1e6 <= t_wait) {
        const double age = (t_wait - imps[ip].time_s * 1e6) / tau;
        if (age < 60.0) acc += g0 * imps[ip].magnitude * std::exp(-age);
        ++ip;
    }

    int state = 1;  // 0 = g, 1 = e, 2 = f; traces start freshly prepared
    bool prev_ground = false;
    int dwell = 0;

    for (std::uint64_t i = 0; i < n_cycles; ++i) {
        if (i != 0) {
            t_wait += ts;
            acc = (acc > 1e-300) ? acc * recovery_per_cycle : 0.0;
            while (ip < imps.size() && imps[ip].time_s * 1e6 <= t_wait) {
                const double age = (t_wait - imps[ip].time_s * 1e6) / tau;
                acc += g0 * imps[ip].magnitude * std::exp(-age);
                ++ip;
            }
        }

        // conditional reset: pi-pulse on a measured-ground outcome swaps g<->e
        if (prev_ground && rng.next_double() < qubit_.reset_fidelity) {
            if (state == 0) state = 1;
            else if (state == 1) state = 0;
        }

        if (state == 2) {
            if (--dwell == 0) state = 1;
        } else {
            if (state == 1) {
                const double p_decay =
                    acc > 0.0 ? 1.0 - std::exp(-wait * (base_rate + acc)) : p_decay_base;
                if (rng.next_double() < p_decay) state = 0;
            }
            if (state == 1 && leak > 0.0 && rng.next_double() < leak) {
                state = 2;
                dwell = qubit_.leakage_dwell_cycles;
            }
        }

        bool ground;
        if (iq_mode) {
            const ClusterGeometry& cl = state == 0 ? qubit_.g : (state == 1 ? qubit_.e : qubit_.f);
            const float iv = static_cast<float>(cl.i_center + cl.i_sigma * rng.next_gauss());
            const float qv = static_cast<float>(cl.q_center + cl.q_sigma * rng.next_gauss());
            const double rot_i = static_cast<double>(iv) * rot_cos_ + static_cast<double>(qv) * rot_sin_;
            ground = rot_i < rot_threshold_;
            emit(iv, qv, ground);
        } else {
            const double u = rng.next_double();
            ground = state == 0   ? u >= qubit_.misid_g_to_e
                     : state == 1 ? u < qubit_.misid_e_to_g
                                  : false;  // |f> reads as not-ground
            emit(0.0f, 0.0f, ground);
        }
        prev_ground = ground;
    }
}

void Simulator::generate_binary(const TruthLog& truth, std::uint64_t trace_index,
                                std::uint64_t n_cycles, std::uint8_t* out) const {
    std::uint64_t i = 0;
    run_chain(truth, trace_index, n_cycles, false,
              [&](float, float, bool ground) { out[i++] = ground ? 0 : 1; });
}

void Simulator::generate_iq(const TruthLog& truth, std::uint64_t trace_index,
                            std::uint64_t n_cycles, float* out) const {
    std::uint64_t i = 0;
    run_chain(truth, trace_index, n_cycles, true, [&](float iv, float qv, bool) {
        out[i++] = iv;
        out[i++] = qv;
    });
}

BinaryTrace Simulator::binary_trace(const TruthLog& truth, std::uint64_t trace_index,
                                    std::uint64_t n_cycles) const {
    BinaryTrace trace;
    trace.parent_index = trace_index;
    trace.ts_us = protocol_.sampling_period_us();
    trace.bits.resize(n_cycles);
    generate_binary(truth, trace_index, n_cycles, trace.bits.data());
    return trace;
}

Trace Simulator::iq_trace(const TruthLog& truth, std::uint64_t trace_index,
                          std::uint64_t n_cycles) const {
    Trace trace;
    trace.index = trace_index;
    trace.ts_us = protocol_.sampling_period_us();
    trace.iq.resize(2 * n_cycles);
    generate_iq(truth, trace_index, n_cycles, trace.iq.data());
    return trace;
}

}  // namespace qpburst
