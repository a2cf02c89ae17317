#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpburst/discrimination.hpp"
#include "qpburst/protocol.hpp"
#include "qpburst/rates.hpp"
#include "qpburst/selection.hpp"
#include "qpburst/trigger.hpp"

namespace qpburst {

// Full run description: every stage's parameters plus run plumbing. JSON
// config files mirror this structure section by section and override
// flag-supplied values.
struct RunConfig {
    ProtocolConfig protocol;
    QubitModel qubit;
    RadiationEnvironment environment;
    TriggerConfig trigger;
    SelectionConfig selection;
    DiscriminationConfig discrimination;

    StreamMode mode = StreamMode::binary;
    std::uint64_t n_cycles = kTraceLength;
    std::uint64_t seed = 1;
    std::string label = "run";
    int workers = 0;  // 0 = QPBURST_WORKERS env, then hardware concurrency

    void validate() const;

    // Copies the trigger window geometry into the selection config; the two
    // must always describe the same windows.
    void sync_selection_geometry();

    // Applies a JSON document (text) over the current values. Unknown keys
    // raise ConfigError; "protocol.sampling_period_us" may replace the
    // explicit cooldown.
    void apply_json(const std::string& json_text);
    static RunConfig from_file(const std::string& path);
    std::string to_json_string() const;  // canonical form used for the config hash
};

int resolve_workers(int requested);

// In-memory end-to-end analysis of one simulated run; the workhorse behind
// both the pipeline subcommand's small-scale path and the large-scale
// statistical tests. Trace generation and scanning run on a worker pool with
// deterministic merging by trace index.
struct RunSummary {
    std::uint64_t n_cycles = 0;  // cycles actually analyzed (whole traces)
    std::uint64_t n_traces = 0;
    std::uint64_t n_quality_rejected = 0;
    double ts_us = 0.0;
    double live_time_s = 0.0;
    double p_g = 0.0;  // pooled over quality-accepted traces

    SelectionThresholds thresholds;
    std::uint64_t n_triggers = 0;
    SelectionStats selection;
    std::vector<TriggeredEvent> events;  // all events with dispositions, trace order

    TruthLog truth;
    std::vector<std::uint8_t> impact_recovered;  // 1:1 with truth.impacts
    double recovered_fraction = 0.0;             // recovered / injected (0 if none injected)

    std::vector<double> trace_t1_us;  // per-trace effective T1' where defined
    double mean_t1_us = 0.0;

    RateResult rate;
    std::vector<ClusterModel> models;  // iq mode only, trace order
};

struct AnalysisOptions {
    TriggerConfig trigger;
    SelectionConfig selection;
    DiscriminationConfig discrimination;
    StreamMode mode = StreamMode::binary;
    int workers = 0;
    bool keep_events = true;  // false drops event records, keeping counters only
    // When set, selection uses these thresholds instead of computing them
    // from the run's own measured P(g).
    const SelectionThresholds* fixed_thresholds = nullptr;
};

RunSummary run_analysis(const Simulator& sim, std::uint64_t n_cycles,
                        const AnalysisOptions& opt);

// File-based stages; the pipeline subcommand chains exactly these, so staged
// and one-shot executions produce byte-identical artifacts.
void stage_simulate(const RunConfig& cfg, const std::string& trace_path,
                    const std::string& truth_path);
void stage_discriminate(const std::string& trace_path, const std::string& binary_path,
                        const std::string& clusters_path, const DiscriminationConfig& cfg,
                        int workers);
void stage_trigger(const std::string& binary_path, const std::string& events_path,
                   const TriggerConfig& cfg, int workers);
void stage_select(const std::string& events_path, const std::string& binary_path,
                  const std::string& clusters_path, const SelectionConfig& cfg,
                  const std::string& selected_path, const std::string& thresholds_path);
RunResult stage_analyze(const std::string& selected_path, const std::string& binary_path,
                        const std::string& clusters_path, const std::string& label,
                        const std::string& results_path);
void stage_budget(const std::string& sources_path, const std::string& report_path,
                  bool quadrature);

// One row per run: label, ts_us, rate, err (optionally expected rate columns
// for efficiency fits). Used by the analyze subcommand's fit mode.
struct RunRateRow {
    std::string label;
    double ts_us = 0.0;
    double rate = 0.0;
    double error = 0.0;
    bool has_expected = false;
    double expected = 0.0;
    double expected_error = 0.0;
};

std::vector<RunRateRow> load_rate_table(const std::string& path);

struct RateFitReport {
    std::vector<FitPoint> averaged;  // per-T_S weighted averages (x = T_S)
    FitResult model;                 // free-intercept rate-vs-T_S fit
};

// Weighted per-T_S averaging plus the first-degree rate-vs-T_S model.
RateFitReport fit_rate_vs_ts(const std::vector<RunRateRow>& rows);

// Corrects rows with expected-rate columns to T_ref using the model, then
// fits measured-vs-expected through the origin: the efficiency slope.
FitResult fit_efficiency(const std::vector<RunRateRow>& rows, const FitResult& model,
                         double t_ref_us);

void write_manifest(const std::string& path, const RunConfig& cfg,
                    const std::vector<std::string>& stages);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace qpburst
