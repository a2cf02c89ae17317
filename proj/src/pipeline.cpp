#include "qpburst/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qpburst/budget.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/tracefile.hpp"
#include "qpburst/version.hpp"

namespace qpburst {

using nlohmann::json;

namespace {

double require_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
    return v.get<double>();
}

std::int64_t require_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("config: " + where + " must be an integer");
    return v.get<std::int64_t>();
}

bool require_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
    return v.get<bool>();
}

std::string require_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("config: " + where + " must be a string");
    return v.get<std::string>();
}

ClusterGeometry parse_cluster(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 4)
        throw ConfigError("config: " + where + " must be [i_center, q_center, i_sigma, q_sigma]");
    ClusterGeometry c;
    c.i_center = require_number(v[0], where);
    c.q_center = require_number(v[1], where);
    c.i_sigma = require_number(v[2], where);
    c.q_sigma = require_number(v[3], where);
    return c;
}

json cluster_to_json(const ClusterGeometry& c) {
    return json::array({c.i_center, c.q_center, c.i_sigma, c.q_sigma});
}

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    if (i < data.size()) {
        std::uint32_t v = data[i] << 16;
        const bool two = i + 1 < data.size();
        if (two) v |= data[i + 1] << 8;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(two ? kB64Alphabet[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::ofstream open_output(const std::string& path, const char* what) {
    std::ofstream out(path);
    if (!out) throw ConfigError(std::string(what) + ": cannot open '" + path + "' for writing");
    return out;
}

// Runs fn(trace_index) over [0, n_traces) on a deterministic worker pool;
// outputs must be written into per-trace slots.
template <typename Fn>
void parallel_traces(std::uint64_t n_traces, int workers, Fn&& fn) {
    const int n_workers =
        static_cast<int>(std::min<std::uint64_t>(std::max(workers, 1), n_traces));
    if (n_workers <= 1) {
        for (std::uint64_t ti = 0; ti < n_traces; ++ti) fn(ti);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto body = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::uint64_t ti = next.fetch_add(1, std::memory_order_relaxed);
            if (ti >= n_traces) break;
            try {
                fn(ti);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

void RunConfig::validate() const {
    protocol.validate();
    qubit.validate();
    environment.validate();
    trigger.validate();
    selection.validate();
    if (n_cycles == 0) throw ConfigError("config: run.n_cycles must be positive");
    if (workers < 0) throw ConfigError("config: run.workers must be >= 0");
    if (selection.signal_window != trigger.signal_span() ||
        selection.control_window != trigger.control_span ||
        selection.n_consecutive != trigger.n_consecutive)
        throw ConfigError("config: selection window geometry out of sync with trigger");
}

void RunConfig::sync_selection_geometry() {
    selection.signal_window = trigger.signal_span();
    selection.control_window = trigger.control_span;
    selection.n_consecutive = trigger.n_consecutive;
}

void RunConfig::apply_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    for (const auto& [section, body] : root.items()) {
        if (!body.is_object())
            throw ConfigError("config: section '" + section + "' must be an object");
        if (section == "protocol") {
            bool saw_period = false, saw_cooldown = false;
            double period = 0.0;
            for (const auto& [key, val] : body.items()) {
                const std::string where = "protocol." + key;
                if (key == "wait_us") protocol.wait_us = require_number(val, where);
                else if (key == "pi_pulse_us") protocol.pi_pulse_us = require_number(val, where);
                else if (key == "readout_us") protocol.readout_us = require_number(val, where);
                else if (key == "cooldown_us") {
                    protocol.cooldown_us = require_number(val, where);
                    saw_cooldown = true;
                } else if (key == "sampling_period_us") {
                    period = require_number(val, where);
                    saw_period = true;
                } else throw ConfigError("config: unknown key '" + where + "'");
            }
            if (saw_period && saw_cooldown)
                throw ConfigError(
                    "config: protocol.sampling_period_us and protocol.cooldown_us are "
                    "mutually exclusive");
            if (saw_period)
                protocol.cooldown_us =
                    period - protocol.wait_us - protocol.pi_pulse_us - protocol.readout_us;
        } else if (section == "qubit") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "qubit." + key;
                if (key == "baseline_t1_us") qubit.baseline_t1_us = require_number(val, where);
                else if (key == "reset_fidelity") qubit.reset_fidelity = require_number(val, where);
                else if (key == "misid_g_to_e") qubit.misid_g_to_e = require_number(val, where);
                else if (key == "misid_e_to_g") qubit.misid_e_to_g = require_number(val, where);
                else if (key == "leakage_prob_f") qubit.leakage_prob_f = require_number(val, where);
                else if (key == "leakage_dwell_cycles")
                    qubit.leakage_dwell_cycles = static_cast<int>(require_integer(val, where));
                else if (key == "clusters") {
                    for (const auto& [state, geom] : val.items()) {
                        if (state == "g") qubit.g = parse_cluster(geom, where + ".g");
                        else if (state == "e") qubit.e = parse_cluster(geom, where + ".e");
                        else if (state == "f") qubit.f = parse_cluster(geom, where + ".f");
                        else throw ConfigError("config: unknown cluster '" + state + "'");
                    }
                } else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else if (section == "environment") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "environment." + key;
                if (key == "impact_rate_per_s")
                    environment.impact_rate_per_s = require_number(val, where);
                else if (key == "gamma0_per_us")
                    environment.gamma0_per_us = require_number(val, where);
                else if (key == "tau_rec_us") environment.tau_rec_us = require_number(val, where);
                else if (key == "magnitude_sigma")
                    environment.magnitude_sigma = require_number(val, where);
                else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else if (section == "trigger") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "trigger." + key;
                if (key == "n_consecutive")
                    trigger.n_consecutive = static_cast<int>(require_integer(val, where));
                else if (key == "window_total")
                    trigger.window_total = static_cast<int>(require_integer(val, where));
                else if (key == "control_span")
                    trigger.control_span = static_cast<int>(require_integer(val, where));
                else if (key == "signal_pre")
                    trigger.signal_pre = static_cast<int>(require_integer(val, where));
                else if (key == "signal_post")
                    trigger.signal_post = static_cast<int>(require_integer(val, where));
                else if (key == "dead_time")
                    trigger.dead_time = static_cast<int>(require_integer(val, where));
                else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else if (section == "selection") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "selection." + key;
                if (key == "noise_rate_target")
                    selection.noise_rate_target = require_number(val, where);
                else if (key == "control_pmf_cut")
                    selection.control_pmf_cut = require_number(val, where);
                else if (key == "trigger_conditioned")
                    selection.trigger_conditioned = require_bool(val, where);
                else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else if (section == "discrimination") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "discrimination." + key;
                if (key == "n_states")
                    discrimination.n_states = static_cast<int>(require_integer(val, where));
                else if (key == "bin_width") discrimination.bin_width = require_number(val, where);
                else if (key == "max_leak") discrimination.max_leak = require_number(val, where);
                else if (key == "max_iterations")
                    discrimination.max_iterations = static_cast<int>(require_integer(val, where));
                else if (key == "threshold_steps")
                    discrimination.threshold_steps = static_cast<int>(require_integer(val, where));
                else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else if (section == "run") {
            for (const auto& [key, val] : body.items()) {
                const std::string where = "run." + key;
                if (key == "n_cycles") {
                    const std::int64_t n = require_integer(val, where);
                    if (n <= 0) throw ConfigError("config: run.n_cycles must be positive");
                    n_cycles = static_cast<std::uint64_t>(n);
                } else if (key == "seed") {
                    seed = static_cast<std::uint64_t>(require_integer(val, where));
                } else if (key == "mode") {
                    const std::string m = require_string(val, where);
                    if (m == "binary") mode = StreamMode::binary;
                    else if (m == "iq") mode = StreamMode::iq;
                    else throw ConfigError("config: run.mode must be 'binary' or 'iq'");
                } else if (key == "label") {
                    label = require_string(val, where);
                } else if (key == "workers") {
                    workers = static_cast<int>(require_integer(val, where));
                } else throw ConfigError("config: unknown key '" + where + "'");
            }
        } else {
            throw ConfigError("config: unknown section '" + section + "'");
        }
    }
    sync_selection_geometry();
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg;
    cfg.apply_json(buf.str());
    return cfg;
}

std::string RunConfig::to_json_string() const {
    json j;
    j["protocol"] = {{"wait_us", protocol.wait_us},
                     {"pi_pulse_us", protocol.pi_pulse_us},
                     {"readout_us", protocol.readout_us},
                     {"cooldown_us", protocol.cooldown_us}};
    j["qubit"] = {{"baseline_t1_us", qubit.baseline_t1_us},
                  {"reset_fidelity", qubit.reset_fidelity},
                  {"misid_g_to_e", qubit.misid_g_to_e},
                  {"misid_e_to_g", qubit.misid_e_to_g},
                  {"leakage_prob_f", qubit.leakage_prob_f},
                  {"leakage_dwell_cycles", qubit.leakage_dwell_cycles},
                  {"clusters",
                   {{"g", cluster_to_json(qubit.g)},
                    {"e", cluster_to_json(qubit.e)},
                    {"f", cluster_to_json(qubit.f)}}}};
    j["environment"] = {{"impact_rate_per_s", environment.impact_rate_per_s},
                        {"gamma0_per_us", environment.gamma0_per_us},
                        {"tau_rec_us", environment.tau_rec_us},
                        {"magnitude_sigma", environment.magnitude_sigma}};
    j["trigger"] = {{"n_consecutive", trigger.n_consecutive},
                    {"window_total", trigger.window_total},
                    {"control_span", trigger.control_span},
                    {"signal_pre", trigger.signal_pre},
                    {"signal_post", trigger.signal_post},
                    {"dead_time", trigger.dead_time}};
    j["selection"] = {{"noise_rate_target", selection.noise_rate_target},
                      {"control_pmf_cut", selection.control_pmf_cut},
                      {"trigger_conditioned", selection.trigger_conditioned}};
    j["discrimination"] = {{"n_states", discrimination.n_states},
                           {"bin_width", discrimination.bin_width},
                           {"max_leak", discrimination.max_leak},
                           {"max_iterations", discrimination.max_iterations},
                           {"threshold_steps", discrimination.threshold_steps}};
    j["run"] = {{"n_cycles", n_cycles},
                {"seed", seed},
                {"mode", mode == StreamMode::binary ? "binary" : "iq"},
                {"label", label},
                {"workers", workers}};
    return j.dump(2);
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QPBURST_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v <= 0 || v > 4096)
            throw ConfigError("QPBURST_WORKERS must be a positive integer");
        return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

RunSummary run_analysis(const Simulator& sim, std::uint64_t n_cycles,
                        const AnalysisOptions& opt) {
    opt.trigger.validate();
    opt.selection.validate();
    if (opt.selection.signal_window != opt.trigger.signal_span() ||
        opt.selection.control_window != opt.trigger.control_span ||
        opt.selection.n_consecutive != opt.trigger.n_consecutive)
        throw ConfigError("analysis: selection window geometry out of sync with trigger");
    const std::uint64_t n_traces = n_cycles / kTraceLength;
    if (n_traces == 0)
        throw ConfigError("analysis: at least one full trace (10^6 cycles) required");
    const std::uint64_t cycles = n_traces * kTraceLength;

    RunSummary sum;
    sum.n_cycles = cycles;
    sum.n_traces = n_traces;
    sum.ts_us = sim.protocol().sampling_period_us();
    sum.truth = sim.draw_impacts(cycles);

    struct TraceOutcome {
        std::uint64_t zeros = 0;
        bool quality_ok = true;
        std::vector<TriggeredEvent> events;
        ClusterModel model;
    };
    std::vector<TraceOutcome> outcomes(n_traces);
    const bool iq = opt.mode == StreamMode::iq;

    parallel_traces(n_traces, resolve_workers(opt.workers), [&](std::uint64_t ti) {
        thread_local std::vector<std::uint8_t> bits;
        thread_local std::vector<float> iqbuf;
        bits.resize(kTraceLength);
        TraceOutcome& out = outcomes[ti];

        if (iq) {
            iqbuf.resize(2 * kTraceLength);
            sim.generate_iq(sum.truth, ti, kTraceLength, iqbuf.data());
            Trace tr;
            tr.index = ti;
            tr.ts_us = sum.ts_us;
            tr.iq = std::move(iqbuf);
            auto res = discriminate_trace(tr, opt.discrimination);
            iqbuf = std::move(tr.iq);
            out.model = std::move(res.model);
            out.quality_ok = res.binary.quality_ok;
            std::copy(res.binary.bits.begin(), res.binary.bits.end(), bits.begin());
        } else {
            sim.generate_binary(sum.truth, ti, kTraceLength, bits.data());
        }

        std::uint64_t zeros = 0;
        for (const auto b : bits) zeros += (b == 0);
        out.zeros = zeros;
        if (out.quality_ok) {
            out.events = scan_triggers(bits.data(), kTraceLength, ti, opt.trigger);
            if (!opt.keep_events)
                for (auto& ev : out.events) {
                    ev.snapshot.clear();
                    ev.snapshot.shrink_to_fit();
                }
        }
    });

    std::uint64_t zeros_total = 0, cycles_ok = 0;
    for (auto& out : outcomes) {
        if (!out.quality_ok) {
            ++sum.n_quality_rejected;
            continue;
        }
        zeros_total += out.zeros;
        cycles_ok += kTraceLength;
        const std::uint64_t ones = kTraceLength - out.zeros;
        if (ones > 0 && out.zeros > 0)
            sum.trace_t1_us.push_back(
                effective_t1_from_counts(ones, kTraceLength, sim.protocol().wait_us));
        for (auto& ev : out.events) sum.events.push_back(std::move(ev));
    }
    if (iq)
        for (auto& out : outcomes) sum.models.push_back(std::move(out.model));
    if (cycles_ok == 0)
        throw DomainError("analysis: every trace failed the quality filter");

    sum.p_g = static_cast<double>(zeros_total) / static_cast<double>(cycles_ok);
    sum.thresholds = opt.fixed_thresholds
                         ? *opt.fixed_thresholds
                         : compute_thresholds(sum.p_g, sum.ts_us, opt.selection);
    sum.n_triggers = sum.events.size();
    sum.selection = select_events(sum.events, sum.thresholds);

    if (!sum.trace_t1_us.empty()) {
        double t1 = 0.0;
        for (const double v : sum.trace_t1_us) t1 += v;
        sum.mean_t1_us = t1 / static_cast<double>(sum.trace_t1_us.size());
    }

    // impact recovery: an impact counts as recovered when at least one
    // accepted event triggers inside its affected cycle span
    std::vector<std::uint64_t> accepted_at;
    for (const auto& ev : sum.events)
        if (ev.disposition == Disposition::accepted) accepted_at.push_back(ev.absolute_index());
    sum.impact_recovered.assign(sum.truth.impacts.size(), 0);
    std::uint64_t recovered = 0;
    for (std::size_t k = 0; k < sum.truth.impacts.size(); ++k) {
        const auto& imp = sum.truth.impacts[k];
        const auto it =
            std::lower_bound(accepted_at.begin(), accepted_at.end(), imp.first_cycle);
        if (it != accepted_at.end() && *it <= imp.last_cycle) {
            sum.impact_recovered[k] = 1;
            ++recovered;
        }
    }
    sum.recovered_fraction =
        sum.truth.impacts.empty()
            ? 0.0
            : static_cast<double>(recovered) / static_cast<double>(sum.truth.impacts.size());

    if (!opt.keep_events) {
        std::erase_if(sum.events,
                      [](const TriggeredEvent& ev) { return ev.disposition != Disposition::accepted; });
    }

    sum.live_time_s = static_cast<double>(cycles_ok) * sum.ts_us * 1e-6;
    sum.rate = event_rate(sum.selection.n_accepted, sum.live_time_s);
    return sum;
}

void stage_simulate(const RunConfig& cfg, const std::string& trace_path,
                    const std::string& truth_path) {
    cfg.validate();
    Simulator sim(cfg.protocol, cfg.qubit, cfg.environment, cfg.seed);
    const TruthLog truth = sim.draw_impacts(cfg.n_cycles);

    const bool iq = cfg.mode == StreamMode::iq;
    TraceFileWriter writer(trace_path, cfg.protocol.sampling_period_us(),
                           iq ? TraceEncoding::iq : TraceEncoding::binary);
    std::vector<std::uint8_t> bits(kTraceLength);
    std::vector<float> iqbuf(iq ? 2 * kTraceLength : 0);
    std::uint64_t done = 0, ti = 0;
    while (done < cfg.n_cycles) {
        const std::uint64_t n = std::min<std::uint64_t>(kTraceLength, cfg.n_cycles - done);
        if (iq) {
            sim.generate_iq(truth, ti, n, iqbuf.data());
            writer.append_iq(iqbuf.data(), n);
        } else {
            sim.generate_binary(truth, ti, n, bits.data());
            writer.append_binary(bits.data(), n);
        }
        done += n;
        ++ti;
    }
    writer.close();

    if (!truth_path.empty()) {
        auto out = open_output(truth_path, "simulate");
        for (const auto& imp : truth.impacts) {
            const json j = {{"time_s", imp.time_s},
                            {"magnitude", imp.magnitude},
                            {"first_cycle", imp.first_cycle},
                            {"last_cycle", imp.last_cycle}};
            out << j.dump() << '\n';
        }
    }
}

namespace {

json model_to_json(std::uint64_t trace_index, const ClusterModel& m, double p_g,
                   bool quality_ok) {
    json states = json::array();
    for (std::size_t i = 0; i < m.states.size(); ++i) {
        const auto& c = m.states[i];
        states.push_back({{"amplitude", c.amplitude},
                          {"i_center", c.i_center},
                          {"i_sigma", c.i_sigma},
                          {"q_center", c.q_center},
                          {"q_sigma", c.q_sigma},
                          {"population", m.populations[i]},
                          {"population_err", m.population_errors[i]}});
    }
    return {{"trace", trace_index},
            {"quality_ok", quality_ok},
            {"p_g", p_g},
            {"theta", m.theta},
            {"threshold", m.threshold},
            {"misid_g_to_e", m.misid_g_to_e},
            {"misid_e_to_g", m.misid_e_to_g},
            {"g_index", m.g_index},
            {"e_index", m.e_index},
            {"chi2", m.chi2},
            {"iterations", m.iterations},
            {"states", states}};
}

struct BinarySummary {
    double ts_us = 0.0;
    std::uint64_t n_traces = 0;
    std::vector<std::uint8_t> quality;  // per trace
    std::vector<std::uint64_t> zeros;   // per trace
    double p_g = 0.0;                   // pooled over quality-accepted traces
    std::uint64_t n_ok = 0;
    double live_time_s = 0.0;
};

BinarySummary summarize_binary(const std::string& binary_path,
                               const std::string& clusters_path) {
    const TraceFileData data = read_trace_file(binary_path);
    if (data.info.encoding != TraceEncoding::binary)
        throw ConfigError("select: '" + binary_path + "' is not a binary trace file");

    BinarySummary s;
    s.ts_us = data.info.ts_us;
    s.n_traces = data.info.count / kTraceLength;
    s.quality.assign(s.n_traces, 1);
    s.zeros.assign(s.n_traces, 0);
    for (std::uint64_t ti = 0; ti < s.n_traces; ++ti) {
        std::uint64_t z = 0;
        const std::uint8_t* p = data.bits.data() + ti * kTraceLength;
        for (std::uint64_t i = 0; i < kTraceLength; ++i) z += (p[i] == 0);
        s.zeros[ti] = z;
    }

    if (!clusters_path.empty()) {
        std::ifstream in(clusters_path);
        if (!in) throw ConfigError("select: cannot open '" + clusters_path + "'");
        std::string line;
        std::uint64_t offset = 0;
        while (std::getline(in, line)) {
            const std::uint64_t line_offset = offset;
            offset += line.size() + 1;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw FormatError("clusters: " + std::string(e.what()), line_offset);
            }
            const std::uint64_t ti = j.at("trace").get<std::uint64_t>();
            if (ti < s.n_traces) s.quality[ti] = j.at("quality_ok").get<bool>() ? 1 : 0;
        }
    }

    std::uint64_t zeros_total = 0;
    for (std::uint64_t ti = 0; ti < s.n_traces; ++ti) {
        if (!s.quality[ti]) continue;
        zeros_total += s.zeros[ti];
        ++s.n_ok;
    }
    if (s.n_ok == 0) throw DomainError("select: no quality-accepted traces");
    s.p_g = static_cast<double>(zeros_total) / (static_cast<double>(s.n_ok) * kTraceLength);
    s.live_time_s = static_cast<double>(s.n_ok) * kTraceLength * s.ts_us * 1e-6;
    return s;
}

json event_to_json(const TriggeredEvent& ev) {
    return {{"trace", ev.trace_index},
            {"t", ev.t},
            {"n_control", ev.n_control},
            {"n_signal", ev.n_signal},
            {"snapshot", base64_encode(ev.snapshot)},
            {"disposition", to_string(ev.disposition)}};
}

}  // namespace

void stage_discriminate(const std::string& trace_path, const std::string& binary_path,
                        const std::string& clusters_path, const DiscriminationConfig& cfg,
                        int workers) {
    const TraceFileData data = read_trace_file(trace_path);
    if (data.info.encoding != TraceEncoding::iq)
        throw ConfigError("discriminate: '" + trace_path + "' is not an IQ trace file");
    const std::uint64_t n_traces = data.info.count / kTraceLength;
    if (n_traces == 0)
        throw ConfigError("discriminate: input holds no full trace (10^6 records)");

    std::vector<DiscriminationResult> results(n_traces);
    parallel_traces(n_traces, resolve_workers(workers), [&](std::uint64_t ti) {
        Trace tr;
        tr.index = ti;
        tr.ts_us = data.info.ts_us;
        tr.iq.assign(data.iq.begin() + static_cast<std::ptrdiff_t>(2 * ti * kTraceLength),
                     data.iq.begin() + static_cast<std::ptrdiff_t>(2 * (ti + 1) * kTraceLength));
        results[ti] = discriminate_trace(tr, cfg);
    });

    TraceFileWriter writer(binary_path, data.info.ts_us, TraceEncoding::binary);
    for (const auto& res : results)
        writer.append_binary(res.binary.bits.data(), res.binary.size());
    writer.close();

    if (!clusters_path.empty()) {
        auto out = open_output(clusters_path, "discriminate");
        for (std::uint64_t ti = 0; ti < n_traces; ++ti) {
            const auto& res = results[ti];
            out << model_to_json(ti, res.model, res.binary.ground_fraction(),
                                 res.binary.quality_ok)
                       .dump()
                << '\n';
        }
    }
}

void stage_trigger(const std::string& binary_path, const std::string& events_path,
                   const TriggerConfig& cfg, int workers) {
    cfg.validate();
    const TraceFileData data = read_trace_file(binary_path);
    if (data.info.encoding != TraceEncoding::binary)
        throw ConfigError("trigger: '" + binary_path + "' is not a binary trace file");
    const std::uint64_t n_traces = data.info.count / kTraceLength;
    if (n_traces == 0)
        throw ConfigError("trigger: input holds no full trace (10^6 records)");

    std::vector<std::vector<TriggeredEvent>> per_trace(n_traces);
    parallel_traces(n_traces, resolve_workers(workers), [&](std::uint64_t ti) {
        per_trace[ti] =
            scan_triggers(data.bits.data() + ti * kTraceLength, kTraceLength, ti, cfg);
    });

    auto out = open_output(events_path, "trigger");
    for (const auto& events : per_trace)
        for (const auto& ev : events) out << event_to_json(ev).dump() << '\n';
}

void stage_select(const std::string& events_path, const std::string& binary_path,
                  const std::string& clusters_path, const SelectionConfig& cfg,
                  const std::string& selected_path, const std::string& thresholds_path) {
    cfg.validate();
    const BinarySummary bin = summarize_binary(binary_path, clusters_path);
    const SelectionThresholds thr = compute_thresholds(bin.p_g, bin.ts_us, cfg);

    std::ifstream in(events_path);
    if (!in) throw ConfigError("select: cannot open '" + events_path + "'");
    auto out = open_output(selected_path, "select");

    std::uint64_t n_input = 0, n_kept = 0, n_accepted = 0;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("events: " + std::string(e.what()), line_offset);
        }
        ++n_input;
        std::uint64_t trace_index;
        int n_control, n_signal;
        try {
            trace_index = j.at("trace").get<std::uint64_t>();
            n_control = j.at("n_control").get<int>();
            n_signal = j.at("n_signal").get<int>();
        } catch (const json::exception& e) {
            throw FormatError("events: " + std::string(e.what()), line_offset);
        }
        // events on quality-rejected traces are dropped with their live time
        if (trace_index < bin.quality.size() && !bin.quality[trace_index]) continue;
        ++n_kept;

        Disposition d;
        if (n_control < thr.n_control_min || n_control > thr.n_control_max)
            d = Disposition::control_noise;
        else if (n_signal < thr.n_signal_min)
            d = Disposition::low_signal;
        else {
            d = Disposition::accepted;
            ++n_accepted;
        }
        j["disposition"] = to_string(d);
        out << j.dump() << '\n';
    }

    if (!thresholds_path.empty()) {
        auto tout = open_output(thresholds_path, "select");
        const json j = {
            {"p_g", thr.p_g},
            {"ts_us", thr.ts_us},
            {"model", cfg.trigger_conditioned ? "trigger_conditioned" : "unconditioned"},
            {"n_signal_min", thr.n_signal_min},
            {"n_control_min", thr.n_control_min},
            {"n_control_max", thr.n_control_max},
            {"achieved_noise_rate", thr.achieved_noise_rate},
            {"noise_rate_target", cfg.noise_rate_target},
            {"control_pmf_cut", cfg.control_pmf_cut},
            {"events_in", n_input},
            {"events_on_live_traces", n_kept},
            {"events_accepted", n_accepted}};
        tout << j.dump(2) << '\n';
    }
}

RunResult stage_analyze(const std::string& selected_path, const std::string& binary_path,
                        const std::string& clusters_path, const std::string& label,
                        const std::string& results_path) {
    const BinarySummary bin = summarize_binary(binary_path, clusters_path);

    std::ifstream in(selected_path);
    if (!in) throw ConfigError("analyze: cannot open '" + selected_path + "'");
    std::uint64_t n_accepted = 0;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("selected events: " + std::string(e.what()), line_offset);
        }
        if (j.at("disposition").get<std::string>() == "accepted") ++n_accepted;
    }

    RunResult result;
    result.label = label;
    result.ts_us = bin.ts_us;
    result.p_g = bin.p_g;
    result.live_time_s = bin.live_time_s;
    result.rate = event_rate(n_accepted, bin.live_time_s);

    if (!results_path.empty()) {
        auto out = open_output(results_path, "analyze");
        out << "label,ts_us,p_g,live_time_s,n_selected,rate_per_s,rate_err_per_s,is_upper_"
               "limit\n";
        out << result.label << ',' << format_double(result.ts_us) << ','
            << format_double(result.p_g) << ',' << format_double(result.live_time_s) << ','
            << result.rate.n_selected << ',' << format_double(result.rate.rate) << ','
            << format_double(result.rate.error) << ',' << (result.rate.is_upper_limit ? 1 : 0)
            << '\n';
    }
    return result;
}

void stage_budget(const std::string& sources_path, const std::string& report_path,
                  bool quadrature) {
    const auto entries = load_sources(sources_path);
    if (entries.empty()) throw ConfigError("budget: no sources in '" + sources_path + "'");

    std::vector<SourceRate> rates;
    rates.reserve(entries.size());
    for (const auto& e : entries) rates.push_back(scale_source_rate(e));
    const BudgetTotal total = total_budget(
        rates, quadrature ? ErrorCombination::quadrature : ErrorCombination::linear);

    auto out = open_output(report_path, "budget");
    out << "name,type,coefficient,coefficient_err,driver,driver_err,rate_per_s,rate_err_per_"
           "s,flag\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto& r = rates[i];
        out << e.name << ',' << to_string(e.type) << ',' << format_double(e.coefficient)
            << ',' << format_double(e.coefficient_err) << ','
            << (e.has_driver ? format_double(e.driver) : std::string()) << ','
            << (e.has_driver ? format_double(e.driver_err) : std::string()) << ','
            << format_double(r.is_limit ? 0.0 : r.rate) << ','
            << format_double(r.is_limit ? 0.0 : r.error) << ','
            << (r.is_limit ? "<" + format_double(r.limit) : std::string()) << '\n';
    }
    out << "total,,,,,," << format_double(total.rate) << ',' << format_double(total.error)
        << ',' << (quadrature ? "quadrature" : "linear") << '\n';
}

std::vector<RunRateRow> load_rate_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("rate table: cannot open '" + path + "'");

    std::vector<RunRateRow> rows;
    std::string line;
    std::uint64_t offset = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        const std::uint64_t line_offset = offset;
        offset += line.size() + 1;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line.rfind("label,", 0) != 0)
                throw FormatError("rate table: missing 'label,...' header", line_offset);
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4 && fields.size() != 6)
            throw FormatError("rate table: expected 4 or 6 comma-separated fields",
                              line_offset);
        try {
            RunRateRow row;
            row.label = fields[0];
            row.ts_us = std::stod(fields[1]);
            row.rate = std::stod(fields[2]);
            row.error = std::stod(fields[3]);
            if (fields.size() == 6) {
                row.has_expected = true;
                row.expected = std::stod(fields[4]);
                row.expected_error = std::stod(fields[5]);
            }
            rows.push_back(std::move(row));
        } catch (const std::exception&) {
            throw FormatError("rate table: unparseable numeric field", line_offset);
        }
    }
    if (rows.empty()) throw ConfigError("rate table: no data rows in '" + path + "'");
    return rows;
}

RateFitReport fit_rate_vs_ts(const std::vector<RunRateRow>& rows) {
    std::map<double, std::pair<double, double>> groups;  // ts -> (sum w*y, sum w)
    for (const auto& row : rows) {
        if (row.has_expected) continue;  // source-calibration runs are not background
        if (row.error <= 0.0)
            throw DomainError("rate fit: rate errors must be positive");
        const double w = 1.0 / (row.error * row.error);
        auto& g = groups[row.ts_us];
        g.first += w * row.rate;
        g.second += w;
    }
    RateFitReport report;
    for (const auto& [ts, g] : groups)
        report.averaged.push_back({ts, g.first / g.second, 1.0 / std::sqrt(g.second)});
    report.model = weighted_linear_fit(report.averaged, /*fix_intercept_zero=*/false);
    return report;
}

FitResult fit_efficiency(const std::vector<RunRateRow>& rows, const FitResult& model,
                         double t_ref_us) {
    std::vector<FitPoint> points;
    for (const auto& row : rows) {
        if (!row.has_expected) continue;
        const RateWithError corrected =
            sampling_period_correction({row.rate, row.error}, row.ts_us, t_ref_us, model);
        points.push_back({row.expected, corrected.rate, corrected.error});
    }
    if (points.size() < 2)
        throw ConfigError("efficiency fit: needs at least two rows with expected rates");
    return weighted_linear_fit(points, /*fix_intercept_zero=*/true);
}

std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_manifest(const std::string& path, const RunConfig& cfg,
                    const std::vector<std::string>& stages) {
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);

    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(cfg.to_json_string())));

    json stage_versions = json::object();
    for (const auto& s : stages) stage_versions[s] = kVersion;

    const json j = {{"config_hash", hash_hex},
                    {"seed", cfg.seed},
                    {"tool_version", kVersion},
                    {"stages", stage_versions},
                    {"created_utc", stamp}};
    auto out = open_output(path, "manifest");
    out << j.dump(2) << '\n';
}

}  // namespace qpburst
