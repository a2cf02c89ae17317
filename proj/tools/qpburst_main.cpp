// qpburst command line driver: thin argument handling over the stage
// functions in qpburst/pipeline.hpp. Exit codes: 0 success, 2 configuration
// or usage error, 3 malformed input data, 4 stage failure.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/pipeline.hpp"
#include "qpburst/version.hpp"

namespace {

using qpburst::RunConfig;

// Flag values shared by the subcommands that describe a run. A JSON config
// file (--config) is applied first; explicitly given flags override it.
struct RunFlags {
    CLI::App* cmd = nullptr;

    std::string config_path;
    std::uint64_t cycles = 0;
    std::uint64_t seed = 0;
    std::string mode;
    std::string label;
    int workers = 0;
    double sampling_period_us = 0.0;
    double wait_us = 0.0;
    double t1_us = 0.0;
    double impact_rate = 0.0;
    double reset_fidelity = 0.0;
    double misid_ge = 0.0;
    double misid_eg = 0.0;
    double gamma0 = 0.0;
    double tau_rec = 0.0;
    double magnitude_sigma = 0.0;
    int n_consecutive = 0;
    int dead_time = 0;
    double noise_target = 0.0;
    double control_cut = 0.0;
    bool trigger_conditioned = false;

    void add_options(CLI::App* c) {
        cmd = c;
        c->add_option("--config", config_path, "JSON config file (flags override it)");
        c->add_option("--cycles", cycles, "number of protocol cycles");
        c->add_option("--seed", seed, "random seed");
        c->add_option("--mode", mode, "record stream: 'binary' or 'iq'");
        c->add_option("--label", label, "run label for reports");
        c->add_option("--workers", workers,
                      "worker threads (0 = QPBURST_WORKERS, then hardware)");
        c->add_option("--sampling-period-us", sampling_period_us,
                      "cycle period T_S in microseconds (absorbed into cooldown)");
        c->add_option("--wait-us", wait_us, "decay wait window in microseconds");
        c->add_option("--t1-us", t1_us, "baseline relaxation time in microseconds");
        c->add_option("--impact-rate", impact_rate, "radiation impact rate in 1/s");
        c->add_option("--reset-fidelity", reset_fidelity, "conditional reset fidelity");
        c->add_option("--misid-ge", misid_ge, "P(read e | ground)");
        c->add_option("--misid-eg", misid_eg, "P(read g | excited)");
        c->add_option("--gamma0", gamma0, "added decay rate at impact, 1/us");
        c->add_option("--tau-rec", tau_rec, "burst recovery time constant, us");
        c->add_option("--magnitude-sigma", magnitude_sigma,
                      "lognormal spread of impact magnitudes");
        c->add_option("--n-consecutive", n_consecutive, "consecutive zeros to trigger");
        c->add_option("--dead-time", dead_time, "post-trigger dead time in cycles");
        c->add_option("--noise-target", noise_target, "false event rate target, 1/s");
        c->add_option("--control-cut", control_cut, "control window PMF cut");
        c->add_flag("--trigger-conditioned", trigger_conditioned,
                    "condition the signal threshold on the trigger pattern");
    }

    RunConfig build() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        const auto has = [this](const char* name) { return cmd->count(name) > 0; };
        if (has("--cycles")) cfg.n_cycles = cycles;
        if (has("--seed")) cfg.seed = seed;
        if (has("--mode")) {
            if (mode == "binary") cfg.mode = qpburst::StreamMode::binary;
            else if (mode == "iq") cfg.mode = qpburst::StreamMode::iq;
            else throw qpburst::ConfigError("--mode must be 'binary' or 'iq'");
        }
        if (has("--label")) cfg.label = label;
        if (has("--workers")) cfg.workers = workers;
        if (has("--wait-us")) cfg.protocol.wait_us = wait_us;
        if (has("--sampling-period-us"))
            cfg.protocol.cooldown_us = sampling_period_us - cfg.protocol.wait_us -
                                       cfg.protocol.pi_pulse_us - cfg.protocol.readout_us;
        if (has("--t1-us")) cfg.qubit.baseline_t1_us = t1_us;
        if (has("--impact-rate")) cfg.environment.impact_rate_per_s = impact_rate;
        if (has("--reset-fidelity")) cfg.qubit.reset_fidelity = reset_fidelity;
        if (has("--misid-ge")) cfg.qubit.misid_g_to_e = misid_ge;
        if (has("--misid-eg")) cfg.qubit.misid_e_to_g = misid_eg;
        if (has("--gamma0")) cfg.environment.gamma0_per_us = gamma0;
        if (has("--tau-rec")) cfg.environment.tau_rec_us = tau_rec;
        if (has("--magnitude-sigma")) cfg.environment.magnitude_sigma = magnitude_sigma;
        if (has("--n-consecutive")) cfg.trigger.n_consecutive = n_consecutive;
        if (has("--dead-time")) cfg.trigger.dead_time = dead_time;
        if (has("--noise-target")) cfg.selection.noise_rate_target = noise_target;
        if (has("--control-cut")) cfg.selection.control_pmf_cut = control_cut;
        if (has("--trigger-conditioned")) cfg.selection.trigger_conditioned = true;
        cfg.sync_selection_geometry();
        return cfg;
    }
};

std::string join(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qpburst: fast decay detection protocol simulator and analysis"};
    app.set_version_flag("--version", qpburst::kVersion);
    app.require_subcommand(1);

    // --- simulate ---
    auto* sim_cmd = app.add_subcommand("simulate", "generate a readout record stream");
    RunFlags sim_flags;
    sim_flags.add_options(sim_cmd);
    std::string sim_trace, sim_truth;
    sim_cmd->add_option("-o,--trace", sim_trace, "output trace file")->required();
    sim_cmd->add_option("--truth", sim_truth, "output impact truth log (JSONL)");
    sim_cmd->callback([&]() {
        qpburst::stage_simulate(sim_flags.build(), sim_trace, sim_truth);
        std::printf("wrote %s\n", sim_trace.c_str());
    });

    // --- discriminate ---
    auto* dis_cmd =
        app.add_subcommand("discriminate", "fit IQ clusters and threshold to binary");
    RunFlags dis_flags;
    dis_flags.add_options(dis_cmd);
    std::string dis_input, dis_binary, dis_clusters;
    int dis_states = 0;
    dis_cmd->add_option("-i,--input", dis_input, "IQ trace file")->required();
    dis_cmd->add_option("-o,--binary", dis_binary, "output binary trace file")->required();
    dis_cmd->add_option("--clusters", dis_clusters, "output cluster models (JSONL)");
    dis_cmd->add_option("--states", dis_states, "number of Gaussian components");
    dis_cmd->callback([&]() {
        RunConfig cfg = dis_flags.build();
        if (dis_cmd->count("--states")) cfg.discrimination.n_states = dis_states;
        qpburst::stage_discriminate(dis_input, dis_binary, dis_clusters, cfg.discrimination,
                                    cfg.workers);
        std::printf("wrote %s\n", dis_binary.c_str());
    });

    // --- trigger ---
    auto* trg_cmd = app.add_subcommand("trigger", "scan binary records for zero runs");
    RunFlags trg_flags;
    trg_flags.add_options(trg_cmd);
    std::string trg_input, trg_events;
    trg_cmd->add_option("-i,--input", trg_input, "binary trace file")->required();
    trg_cmd->add_option("-o,--events", trg_events, "output event candidates (JSONL)")
        ->required();
    trg_cmd->callback([&]() {
        const RunConfig cfg = trg_flags.build();
        qpburst::stage_trigger(trg_input, trg_events, cfg.trigger, cfg.workers);
        std::printf("wrote %s\n", trg_events.c_str());
    });

    // --- select ---
    auto* sel_cmd = app.add_subcommand("select", "apply signal and control thresholds");
    RunFlags sel_flags;
    sel_flags.add_options(sel_cmd);
    std::string sel_events, sel_binary, sel_clusters, sel_out, sel_thresholds;
    sel_cmd->add_option("-i,--events", sel_events, "event candidates (JSONL)")->required();
    sel_cmd->add_option("--binary", sel_binary, "binary trace file (for P(g) and T_S)")
        ->required();
    sel_cmd->add_option("--clusters", sel_clusters, "cluster models for quality flags");
    sel_cmd->add_option("-o,--selected", sel_out, "output events with dispositions")
        ->required();
    sel_cmd->add_option("--thresholds", sel_thresholds, "output thresholds (JSON)");
    sel_cmd->callback([&]() {
        const RunConfig cfg = sel_flags.build();
        qpburst::stage_select(sel_events, sel_binary, sel_clusters, cfg.selection, sel_out,
                              sel_thresholds);
        std::printf("wrote %s\n", sel_out.c_str());
    });

    // --- analyze ---
    auto* ana_cmd =
        app.add_subcommand("analyze", "event rate per run, or rate-vs-T_S model fits");
    std::string ana_selected, ana_binary, ana_clusters, ana_label = "run", ana_out;
    std::string ana_runs, ana_averaged;
    double ana_t_ref = 73.6;
    ana_cmd->add_option("--selected", ana_selected, "selected events (JSONL)");
    ana_cmd->add_option("--binary", ana_binary, "binary trace file");
    ana_cmd->add_option("--clusters", ana_clusters, "cluster models for quality flags");
    ana_cmd->add_option("--label", ana_label, "row label");
    ana_cmd->add_option("--runs", ana_runs, "rate table CSV for fit mode");
    ana_cmd->add_option("--averaged", ana_averaged, "output per-T_S averages (CSV)");
    ana_cmd->add_option("--t-ref", ana_t_ref, "reference T_S for efficiency correction, us");
    ana_cmd->add_option("-o,--out", ana_out, "output file (CSV row, or JSON in fit mode)")
        ->required();
    ana_cmd->callback([&]() {
        if (!ana_runs.empty()) {
            const auto rows = qpburst::load_rate_table(ana_runs);
            const auto report = qpburst::fit_rate_vs_ts(rows);
            if (!ana_averaged.empty()) {
                std::FILE* f = std::fopen(ana_averaged.c_str(), "w");
                if (!f)
                    throw qpburst::ConfigError("analyze: cannot open '" + ana_averaged + "'");
                std::fprintf(f, "ts_us,rate_per_s,err_per_s\n");
                for (const auto& p : report.averaged)
                    std::fprintf(f, "%.12g,%.12g,%.12g\n", p.x, p.y, p.sigma_y);
                std::fclose(f);
            }
            bool any_expected = false;
            for (const auto& r : rows) any_expected |= r.has_expected;
            std::string eff_json = "null";
            if (any_expected) {
                const auto eff = qpburst::fit_efficiency(rows, report.model, ana_t_ref);
                char buf[256];
                std::snprintf(buf, sizeof(buf),
                              "{\"p1\": %.12g, \"p1_err\": %.12g, \"chi2\": %.12g, "
                              "\"dof\": %d, \"t_ref_us\": %.12g}",
                              eff.p1, eff.p1_err, eff.chi2, eff.dof, ana_t_ref);
                eff_json = buf;
            }
            std::FILE* f = std::fopen(ana_out.c_str(), "w");
            if (!f) throw qpburst::ConfigError("analyze: cannot open '" + ana_out + "'");
            const auto& m = report.model;
            std::fprintf(f,
                         "{\n  \"model\": {\"p0\": %.12g, \"p0_err\": %.12g, \"p1\": %.12g, "
                         "\"p1_err\": %.12g, \"chi2\": %.12g, \"dof\": %d},\n"
                         "  \"efficiency\": %s\n}\n",
                         m.p0, m.p0_err, m.p1, m.p1_err, m.chi2, m.dof, eff_json.c_str());
            std::fclose(f);
            std::printf("rate model: p0=%.6g 1/s, p1=%.6g 1/s/us\n", m.p0, m.p1);
        } else {
            if (ana_selected.empty() || ana_binary.empty())
                throw qpburst::ConfigError(
                    "analyze: --selected and --binary are required without --runs");
            const auto result = qpburst::stage_analyze(ana_selected, ana_binary, ana_clusters,
                                                       ana_label, ana_out);
            std::printf("%s: %llu events in %.3f s live", result.label.c_str(),
                        static_cast<unsigned long long>(result.rate.n_selected),
                        result.live_time_s);
            if (result.rate.is_upper_limit)
                std::printf(", rate < %.4g 1/s (90%% CL)\n", result.rate.error);
            else
                std::printf(", rate (%.4g +- %.4g) 1/s\n", result.rate.rate,
                            result.rate.error);
        }
    });

    // --- budget ---
    auto* bud_cmd = app.add_subcommand("budget", "combine source rates into a budget");
    std::string bud_sources, bud_out;
    bool bud_quadrature = false;
    bud_cmd->add_option("-i,--sources", bud_sources, "source table (text)")->required();
    bud_cmd->add_option("-o,--out", bud_out, "output budget report (CSV)")->required();
    bud_cmd->add_flag("--quadrature", bud_quadrature, "combine errors in quadrature");
    bud_cmd->callback([&]() {
        qpburst::stage_budget(bud_sources, bud_out, bud_quadrature);
        std::printf("wrote %s\n", bud_out.c_str());
    });

    // --- pipeline ---
    auto* pip_cmd =
        app.add_subcommand("pipeline", "simulate and run every analysis stage in order");
    RunFlags pip_flags;
    pip_flags.add_options(pip_cmd);
    std::string pip_outdir;
    pip_cmd->add_option("-o,--outdir", pip_outdir, "output directory")->required();
    pip_cmd->callback([&]() {
        const RunConfig cfg = pip_flags.build();
        cfg.validate();
        std::filesystem::create_directories(pip_outdir);
        const bool iq = cfg.mode == qpburst::StreamMode::iq;

        const std::string raw = join(pip_outdir, iq ? "traces.qrt" : "binary.qrt");
        const std::string binary = join(pip_outdir, "binary.qrt");
        const std::string clusters = iq ? join(pip_outdir, "clusters.jsonl") : std::string();
        qpburst::stage_simulate(cfg, raw, join(pip_outdir, "truth.jsonl"));
        if (iq)
            qpburst::stage_discriminate(raw, binary, clusters, cfg.discrimination,
                                        cfg.workers);
        qpburst::stage_trigger(binary, join(pip_outdir, "events.jsonl"), cfg.trigger,
                               cfg.workers);
        qpburst::stage_select(join(pip_outdir, "events.jsonl"), binary, clusters,
                              cfg.selection, join(pip_outdir, "selected.jsonl"),
                              join(pip_outdir, "thresholds.json"));
        const auto result =
            qpburst::stage_analyze(join(pip_outdir, "selected.jsonl"), binary, clusters,
                                   cfg.label, join(pip_outdir, "results.csv"));

        std::vector<std::string> stages = {"simulate", "trigger", "select", "analyze"};
        if (iq) stages.insert(stages.begin() + 1, "discriminate");
        qpburst::write_manifest(join(pip_outdir, "manifest.json"), cfg, stages);

        std::printf("%s: P(g)=%.4f, %llu events in %.3f s live", result.label.c_str(),
                    result.p_g, static_cast<unsigned long long>(result.rate.n_selected),
                    result.live_time_s);
        if (result.rate.is_upper_limit)
            std::printf(", rate < %.4g 1/s (90%% CL)\n", result.rate.error);
        else
            std::printf(", rate (%.4g +- %.4g) 1/s\n", result.rate.rate, result.rate.error);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const qpburst::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const qpburst::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}
