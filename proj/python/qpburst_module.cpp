// Python bindings for the qpburst core: simulation, discrimination,
// triggering, selection, rate estimation and the budget arithmetic.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "qpburst/budget.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/pipeline.hpp"
#include "qpburst/tracefile.hpp"
#include "qpburst/version.hpp"

namespace py = pybind11;
using namespace qpburst;

namespace {

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()),
                     static_cast<py::ssize_t>(v.size()));
}

py::array_t<float> iq_array(const Trace& tr) {
    py::array_t<float> out({static_cast<py::ssize_t>(tr.size()), py::ssize_t(2)});
    std::memcpy(out.mutable_data(), tr.iq.data(), tr.iq.size() * sizeof(float));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fast decay detection protocol: simulation and analysis core";
    m.attr("__version__") = kVersion;
    m.attr("TRACE_LENGTH") = kTraceLength;

    // exception hierarchy (registered base-first; translators run newest-first)
    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<FormatError>(m, "FormatError", base);
    py::register_exception<DomainError>(m, "DomainError", base);
    py::register_exception<DegeneracyError>(m, "DegeneracyError", base);
    py::register_exception<SaturationError>(m, "SaturationError", base);
    py::register_exception<FitError>(m, "FitError", base);

    py::enum_<StreamMode>(m, "StreamMode")
        .value("binary", StreamMode::binary)
        .value("iq", StreamMode::iq);

    py::class_<ProtocolConfig>(m, "ProtocolConfig")
        .def(py::init<>())
        .def_readwrite("wait_us", &ProtocolConfig::wait_us)
        .def_readwrite("pi_pulse_us", &ProtocolConfig::pi_pulse_us)
        .def_readwrite("readout_us", &ProtocolConfig::readout_us)
        .def_readwrite("cooldown_us", &ProtocolConfig::cooldown_us)
        .def("sampling_period_us", &ProtocolConfig::sampling_period_us)
        .def_static("with_sampling_period", &ProtocolConfig::with_sampling_period,
                    py::arg("ts_us"), py::arg("wait_us") = 5.0)
        .def("validate", &ProtocolConfig::validate);

    py::class_<ClusterGeometry>(m, "ClusterGeometry")
        .def(py::init<>())
        .def(py::init([](double ic, double qc, double is, double qs) {
                 return ClusterGeometry{ic, qc, is, qs};
             }),
             py::arg("i_center"), py::arg("q_center"), py::arg("i_sigma"),
             py::arg("q_sigma"))
        .def_readwrite("i_center", &ClusterGeometry::i_center)
        .def_readwrite("q_center", &ClusterGeometry::q_center)
        .def_readwrite("i_sigma", &ClusterGeometry::i_sigma)
        .def_readwrite("q_sigma", &ClusterGeometry::q_sigma);

    py::class_<QubitModel>(m, "QubitModel")
        .def(py::init<>())
        .def_readwrite("baseline_t1_us", &QubitModel::baseline_t1_us)
        .def_readwrite("reset_fidelity", &QubitModel::reset_fidelity)
        .def_readwrite("misid_g_to_e", &QubitModel::misid_g_to_e)
        .def_readwrite("misid_e_to_g", &QubitModel::misid_e_to_g)
        .def_readwrite("leakage_prob_f", &QubitModel::leakage_prob_f)
        .def_readwrite("leakage_dwell_cycles", &QubitModel::leakage_dwell_cycles)
        .def_readwrite("g", &QubitModel::g)
        .def_readwrite("e", &QubitModel::e)
        .def_readwrite("f", &QubitModel::f)
        .def("validate", &QubitModel::validate)
        .def("stationary_ground_probability", &QubitModel::stationary_ground_probability,
             py::arg("wait_us"));

    py::class_<RadiationEnvironment>(m, "RadiationEnvironment")
        .def(py::init<>())
        .def_readwrite("impact_rate_per_s", &RadiationEnvironment::impact_rate_per_s)
        .def_readwrite("gamma0_per_us", &RadiationEnvironment::gamma0_per_us)
        .def_readwrite("tau_rec_us", &RadiationEnvironment::tau_rec_us)
        .def_readwrite("magnitude_sigma", &RadiationEnvironment::magnitude_sigma)
        .def("validate", &RadiationEnvironment::validate);

    py::class_<Impact>(m, "Impact")
        .def_readonly("time_s", &Impact::time_s)
        .def_readonly("magnitude", &Impact::magnitude)
        .def_readonly("first_cycle", &Impact::first_cycle)
        .def_readonly("last_cycle", &Impact::last_cycle);

    py::class_<TruthLog>(m, "TruthLog")
        .def(py::init<>())
        .def_readonly("impacts", &TruthLog::impacts);

    py::class_<Trace>(m, "Trace")
        .def_readonly("index", &Trace::index)
        .def_readonly("ts_us", &Trace::ts_us)
        .def("__len__", &Trace::size)
        .def_property_readonly("iq", &iq_array, "records as an (n, 2) float32 array");

    py::class_<BinaryTrace>(m, "BinaryTrace")
        .def_readonly("parent_index", &BinaryTrace::parent_index)
        .def_readonly("ts_us", &BinaryTrace::ts_us)
        .def_readonly("quality_ok", &BinaryTrace::quality_ok)
        .def("__len__", &BinaryTrace::size)
        .def("ground_fraction", &BinaryTrace::ground_fraction)
        .def_property_readonly(
            "bits", [](const BinaryTrace& b) { return to_bytes(b.bits); },
            "one byte per cycle, 0 = measured ground");

    m.def("expected_ground_probability", &expected_ground_probability, py::arg("t1_us"),
          py::arg("wait_us"));
    m.def("burst_zero_count", &burst_zero_count, py::arg("burst_ms"), py::arg("ts_us"));

    py::class_<Simulator>(m, "Simulator")
        .def(py::init<ProtocolConfig, QubitModel, RadiationEnvironment, std::uint64_t>(),
             py::arg("protocol"), py::arg("qubit"), py::arg("environment"), py::arg("seed"))
        .def("draw_impacts", &Simulator::draw_impacts, py::arg("n_cycles"),
             py::call_guard<py::gil_scoped_release>())
        .def("binary_trace", &Simulator::binary_trace, py::arg("truth"),
             py::arg("trace_index"), py::arg("n_cycles") = kTraceLength,
             py::call_guard<py::gil_scoped_release>())
        .def("iq_trace", &Simulator::iq_trace, py::arg("truth"), py::arg("trace_index"),
             py::arg("n_cycles") = kTraceLength,
             py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("protocol", &Simulator::protocol)
        .def_property_readonly("qubit", &Simulator::qubit)
        .def_property_readonly("environment", &Simulator::environment)
        .def_property_readonly("seed", &Simulator::seed);

    py::enum_<Disposition>(m, "Disposition")
        .value("pending", Disposition::pending)
        .value("accepted", Disposition::accepted)
        .value("low_signal", Disposition::low_signal)
        .value("control_noise", Disposition::control_noise);

    py::class_<TriggerConfig>(m, "TriggerConfig")
        .def(py::init<>())
        .def_readwrite("n_consecutive", &TriggerConfig::n_consecutive)
        .def_readwrite("window_total", &TriggerConfig::window_total)
        .def_readwrite("control_span", &TriggerConfig::control_span)
        .def_readwrite("signal_pre", &TriggerConfig::signal_pre)
        .def_readwrite("signal_post", &TriggerConfig::signal_post)
        .def_readwrite("dead_time", &TriggerConfig::dead_time)
        .def("signal_span", &TriggerConfig::signal_span)
        .def("min_trigger_index", &TriggerConfig::min_trigger_index)
        .def("validate", &TriggerConfig::validate);

    py::class_<TriggeredEvent>(m, "TriggeredEvent")
        .def_readonly("trace_index", &TriggeredEvent::trace_index)
        .def_readonly("t", &TriggeredEvent::t)
        .def_readonly("n_control", &TriggeredEvent::n_control)
        .def_readonly("n_signal", &TriggeredEvent::n_signal)
        .def_readonly("disposition", &TriggeredEvent::disposition)
        .def("absolute_index", &TriggeredEvent::absolute_index)
        .def_property_readonly(
            "snapshot", [](const TriggeredEvent& ev) { return to_bytes(ev.snapshot); });

    m.def(
        "scan_triggers",
        [](const BinaryTrace& binary, const TriggerConfig& cfg) {
            return scan_triggers(binary, cfg);
        },
        py::arg("binary"), py::arg("config") = TriggerConfig{});

    py::class_<SelectionConfig>(m, "SelectionConfig")
        .def(py::init<>())
        .def_readwrite("signal_window", &SelectionConfig::signal_window)
        .def_readwrite("control_window", &SelectionConfig::control_window)
        .def_readwrite("n_consecutive", &SelectionConfig::n_consecutive)
        .def_readwrite("noise_rate_target", &SelectionConfig::noise_rate_target)
        .def_readwrite("control_pmf_cut", &SelectionConfig::control_pmf_cut)
        .def_readwrite("trigger_conditioned", &SelectionConfig::trigger_conditioned)
        .def("validate", &SelectionConfig::validate);

    py::class_<SelectionThresholds>(m, "SelectionThresholds")
        .def(py::init<>())
        .def_readwrite("n_signal_min", &SelectionThresholds::n_signal_min)
        .def_readwrite("n_control_min", &SelectionThresholds::n_control_min)
        .def_readwrite("n_control_max", &SelectionThresholds::n_control_max)
        .def_readwrite("p_g", &SelectionThresholds::p_g)
        .def_readwrite("ts_us", &SelectionThresholds::ts_us)
        .def_readonly("achieved_noise_rate", &SelectionThresholds::achieved_noise_rate);

    py::class_<SelectionStats>(m, "SelectionStats")
        .def_readonly("n_input", &SelectionStats::n_input)
        .def_readonly("n_accepted", &SelectionStats::n_accepted)
        .def_readonly("n_low_signal", &SelectionStats::n_low_signal)
        .def_readonly("n_control_noise", &SelectionStats::n_control_noise);

    m.def("binomial_pmf", &binomial_pmf, py::arg("n"), py::arg("p"), py::arg("k"));
    m.def("binomial_tail", &binomial_tail, py::arg("n"), py::arg("p"), py::arg("k"));
    m.def("compute_signal_threshold", &compute_signal_threshold, py::arg("p_g"),
          py::arg("ts_us"), py::arg("config") = SelectionConfig{});
    m.def("compute_control_bounds", &compute_control_bounds, py::arg("p_g"),
          py::arg("config") = SelectionConfig{});
    m.def("compute_thresholds", &compute_thresholds, py::arg("p_g"), py::arg("ts_us"),
          py::arg("config") = SelectionConfig{});
    m.def(
        "select_events",
        [](std::vector<TriggeredEvent> events, const SelectionThresholds& thr) {
            const SelectionStats stats = select_events(events, thr);
            return py::make_tuple(std::move(events), stats);
        },
        py::arg("events"), py::arg("thresholds"),
        "returns (events with dispositions, stats)");

    py::class_<GaussComponent>(m, "GaussComponent")
        .def_readonly("amplitude", &GaussComponent::amplitude)
        .def_readonly("i_center", &GaussComponent::i_center)
        .def_readonly("i_sigma", &GaussComponent::i_sigma)
        .def_readonly("q_center", &GaussComponent::q_center)
        .def_readonly("q_sigma", &GaussComponent::q_sigma);

    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("states", &ClusterModel::states)
        .def_readonly("populations", &ClusterModel::populations)
        .def_readonly("population_errors", &ClusterModel::population_errors)
        .def_readonly("e_index", &ClusterModel::e_index)
        .def_readonly("g_index", &ClusterModel::g_index)
        .def_readonly("theta", &ClusterModel::theta)
        .def_readonly("threshold", &ClusterModel::threshold)
        .def_readonly("misid_g_to_e", &ClusterModel::misid_g_to_e)
        .def_readonly("misid_e_to_g", &ClusterModel::misid_e_to_g)
        .def_readonly("chi2", &ClusterModel::chi2)
        .def_readonly("iterations", &ClusterModel::iterations)
        .def("population", &ClusterModel::population, py::arg("index"))
        .def("leakage_population", &ClusterModel::leakage_population);

    py::class_<DiscriminationConfig>(m, "DiscriminationConfig")
        .def(py::init<>())
        .def_readwrite("n_states", &DiscriminationConfig::n_states)
        .def_readwrite("bin_width", &DiscriminationConfig::bin_width)
        .def_readwrite("max_leak", &DiscriminationConfig::max_leak)
        .def_readwrite("max_iterations", &DiscriminationConfig::max_iterations)
        .def_readwrite("threshold_steps", &DiscriminationConfig::threshold_steps);

    m.def("fit_clusters", &fit_clusters, py::arg("trace"), py::arg("n_states"),
          py::arg("bin_width") = 0.0, py::arg("max_iterations") = 200,
          py::call_guard<py::gil_scoped_release>());
    m.def("quality_filter", &quality_filter, py::arg("model"), py::arg("max_leak") = 0.01);

    py::class_<DiscriminationResult>(m, "DiscriminationResult")
        .def_readonly("model", &DiscriminationResult::model)
        .def_readonly("binary", &DiscriminationResult::binary);

    m.def("discriminate_trace", &discriminate_trace, py::arg("trace"),
          py::arg("config") = DiscriminationConfig{},
          py::call_guard<py::gil_scoped_release>());

    py::class_<RateResult>(m, "RateResult")
        .def_readonly("rate", &RateResult::rate)
        .def_readonly("error", &RateResult::error)
        .def_readonly("is_upper_limit", &RateResult::is_upper_limit)
        .def_readonly("n_selected", &RateResult::n_selected)
        .def_readonly("live_time_s", &RateResult::live_time_s);

    m.def("event_rate", &event_rate, py::arg("n_selected"), py::arg("live_time_s"));

    py::class_<FitPoint>(m, "FitPoint")
        .def(py::init([](double x, double y, double sigma_y) {
                 return FitPoint{x, y, sigma_y};
             }),
             py::arg("x"), py::arg("y"), py::arg("sigma_y"))
        .def_readwrite("x", &FitPoint::x)
        .def_readwrite("y", &FitPoint::y)
        .def_readwrite("sigma_y", &FitPoint::sigma_y);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("p0", &FitResult::p0)
        .def_readonly("p0_err", &FitResult::p0_err)
        .def_readonly("p1", &FitResult::p1)
        .def_readonly("p1_err", &FitResult::p1_err)
        .def_readonly("chi2", &FitResult::chi2)
        .def_readonly("dof", &FitResult::dof)
        .def_readonly("intercept_fixed", &FitResult::intercept_fixed)
        .def("eval", &FitResult::eval, py::arg("x"));

    m.def("weighted_linear_fit", &weighted_linear_fit, py::arg("points"),
          py::arg("fix_intercept_zero") = false);

    py::class_<RateWithError>(m, "RateWithError")
        .def(py::init([](double rate, double error) { return RateWithError{rate, error}; }),
             py::arg("rate"), py::arg("error"))
        .def_readwrite("rate", &RateWithError::rate)
        .def_readwrite("error", &RateWithError::error);

    m.def("sampling_period_correction", &sampling_period_correction, py::arg("value"),
          py::arg("t_from_us"), py::arg("t_to_us"), py::arg("model"));
    m.def("effective_t1_from_counts", &effective_t1_from_counts, py::arg("n_excited"),
          py::arg("n_total"), py::arg("wait_us"));
    m.def(
        "effective_t1",
        [](const BinaryTrace& binary, double wait_us) { return effective_t1(binary, wait_us); },
        py::arg("binary"), py::arg("wait_us"));
    m.def("impact_probability", &impact_probability, py::arg("rate_per_s"), py::arg("dt_s"));
    m.def("available_time", &available_time, py::arg("rate_per_s"), py::arg("p_max"));

    py::enum_<SourceType>(m, "SourceType")
        .value("flux", SourceType::flux)
        .value("activity", SourceType::activity)
        .value("fixed", SourceType::fixed)
        .value("limit", SourceType::limit);

    py::class_<SourceEntry>(m, "SourceEntry")
        .def(py::init<>())
        .def_readwrite("name", &SourceEntry::name)
        .def_readwrite("type", &SourceEntry::type)
        .def_readwrite("coefficient", &SourceEntry::coefficient)
        .def_readwrite("coefficient_err", &SourceEntry::coefficient_err)
        .def_readwrite("driver", &SourceEntry::driver)
        .def_readwrite("driver_err", &SourceEntry::driver_err)
        .def_readwrite("has_driver", &SourceEntry::has_driver);

    py::class_<SourceRate>(m, "SourceRate")
        .def_readonly("name", &SourceRate::name)
        .def_readonly("type", &SourceRate::type)
        .def_readonly("rate", &SourceRate::rate)
        .def_readonly("error", &SourceRate::error)
        .def_readonly("limit", &SourceRate::limit)
        .def_readonly("is_limit", &SourceRate::is_limit);

    py::class_<BudgetTotal>(m, "BudgetTotal")
        .def_readonly("rate", &BudgetTotal::rate)
        .def_readonly("error", &BudgetTotal::error);

    py::enum_<ErrorCombination>(m, "ErrorCombination")
        .value("linear", ErrorCombination::linear)
        .value("quadrature", ErrorCombination::quadrature);

    m.def("scale_source_rate", &scale_source_rate, py::arg("entry"));
    m.def("total_budget", &total_budget, py::arg("rates"),
          py::arg("combine") = ErrorCombination::linear);
    m.def("load_sources", &load_sources, py::arg("path"));
    m.def("fit_activity_coefficient", &fit_activity_coefficient, py::arg("points"));

    py::enum_<TraceEncoding>(m, "TraceEncoding")
        .value("iq", TraceEncoding::iq)
        .value("binary", TraceEncoding::binary);

    py::class_<TraceFileInfo>(m, "TraceFileInfo")
        .def_readonly("version", &TraceFileInfo::version)
        .def_readonly("ts_us", &TraceFileInfo::ts_us)
        .def_readonly("count", &TraceFileInfo::count)
        .def_readonly("encoding", &TraceFileInfo::encoding);

    py::class_<TraceFileData>(m, "TraceFileData")
        .def_readonly("info", &TraceFileData::info)
        .def_property_readonly(
            "iq",
            [](const TraceFileData& d) {
                py::array_t<float> out(
                    {static_cast<py::ssize_t>(d.iq.size() / 2), py::ssize_t(2)});
                std::memcpy(out.mutable_data(), d.iq.data(), d.iq.size() * sizeof(float));
                return out;
            })
        .def_property_readonly("bits",
                               [](const TraceFileData& d) { return to_bytes(d.bits); });

    m.def("read_trace_header", &read_trace_header, py::arg("path"));
    m.def("read_trace_file", &read_trace_file, py::arg("path"));

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("protocol", &RunConfig::protocol)
        .def_readwrite("qubit", &RunConfig::qubit)
        .def_readwrite("environment", &RunConfig::environment)
        .def_readwrite("trigger", &RunConfig::trigger)
        .def_readwrite("selection", &RunConfig::selection)
        .def_readwrite("discrimination", &RunConfig::discrimination)
        .def_readwrite("mode", &RunConfig::mode)
        .def_readwrite("n_cycles", &RunConfig::n_cycles)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("label", &RunConfig::label)
        .def_readwrite("workers", &RunConfig::workers)
        .def("validate", &RunConfig::validate)
        .def("sync_selection_geometry", &RunConfig::sync_selection_geometry)
        .def("apply_json", &RunConfig::apply_json, py::arg("json_text"))
        .def_static("from_file", &RunConfig::from_file, py::arg("path"))
        .def("to_json_string", &RunConfig::to_json_string);

    py::class_<RunSummary>(m, "RunSummary")
        .def_readonly("n_cycles", &RunSummary::n_cycles)
        .def_readonly("n_traces", &RunSummary::n_traces)
        .def_readonly("n_quality_rejected", &RunSummary::n_quality_rejected)
        .def_readonly("ts_us", &RunSummary::ts_us)
        .def_readonly("live_time_s", &RunSummary::live_time_s)
        .def_readonly("p_g", &RunSummary::p_g)
        .def_readonly("thresholds", &RunSummary::thresholds)
        .def_readonly("n_triggers", &RunSummary::n_triggers)
        .def_readonly("selection", &RunSummary::selection)
        .def_readonly("events", &RunSummary::events)
        .def_readonly("truth", &RunSummary::truth)
        .def_property_readonly(
            "impact_recovered",
            [](const RunSummary& s) { return to_bytes(s.impact_recovered); })
        .def_readonly("recovered_fraction", &RunSummary::recovered_fraction)
        .def_readonly("trace_t1_us", &RunSummary::trace_t1_us)
        .def_readonly("mean_t1_us", &RunSummary::mean_t1_us)
        .def_readonly("rate", &RunSummary::rate)
        .def_readonly("models", &RunSummary::models);

    m.def(
        "run_analysis",
        [](const RunConfig& cfg, std::optional<SelectionThresholds> thresholds) {
            cfg.validate();
            Simulator sim(cfg.protocol, cfg.qubit, cfg.environment, cfg.seed);
            AnalysisOptions opt;
            opt.trigger = cfg.trigger;
            opt.selection = cfg.selection;
            opt.discrimination = cfg.discrimination;
            opt.mode = cfg.mode;
            opt.workers = cfg.workers;
            if (thresholds) opt.fixed_thresholds = &*thresholds;
            return run_analysis(sim, cfg.n_cycles, opt);
        },
        py::arg("config"), py::arg("thresholds") = std::nullopt,
        py::call_guard<py::gil_scoped_release>(),
        "simulate n_cycles and run the full analysis chain in memory");

    m.def("resolve_workers", &resolve_workers, py::arg("requested") = 0);
    m.def("fnv1a_hash", &fnv1a_hash, py::arg("text"));
}
