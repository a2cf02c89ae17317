"""Smoke checks of the Python bindings against pinned analysis values."""

import math

import numpy as np

import qpburst


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


# --- module identity ---
assert qpburst.__version__ == "1.0.0"
assert qpburst.TRACE_LENGTH == 1_000_000
assert qpburst.fnv1a_hash("") == 14695981039346656037

# --- binomial machinery and thresholds ---
approx(qpburst.binomial_tail(4, 0.5, 2), 11 / 16, 1e-12)
assert qpburst.binomial_tail(40, 0.25, 0) == 1.0
assert qpburst.compute_signal_threshold(0.118, 73.6) == 20
assert qpburst.compute_control_bounds(0.145) == (8, 23)
thr = qpburst.compute_thresholds(0.145, 67.6)
assert thr.n_signal_min == 22
assert (thr.n_control_min, thr.n_control_max) == (8, 23)
assert 0.0 < thr.achieved_noise_rate < 1e-4

# --- quiet-detector simulation round trip ---
sim = qpburst.Simulator(
    qpburst.ProtocolConfig(),
    qpburst.QubitModel(),
    qpburst.RadiationEnvironment(),
    seed=1,
)
truth = sim.draw_impacts(1_000_000)
assert len(truth.impacts) == 0  # default environment has no impacts
bt = sim.binary_trace(truth, 0)
assert len(bt) == 1_000_000
assert bt.ts_us == 73.6
pg = bt.ground_fraction()
approx(pg, 0.147293079312, 0.0015)  # stationary P(g) of the default chain
approx(qpburst.effective_t1(bt, 5.0), 31.379562868832874, 1.0)

events = qpburst.scan_triggers(bt)
assert len(events) > 0
assert all(ev.t >= 110 for ev in events)
selected, stats = qpburst.select_events(events, qpburst.compute_thresholds(pg, 73.6))
assert stats.n_input == len(events)
assert stats.n_accepted + stats.n_low_signal + stats.n_control_noise == stats.n_input
assert all(ev.disposition != qpburst.Disposition.pending for ev in selected)

# --- rate estimation ---
ul = qpburst.event_rate(0, 147.2)
assert ul.is_upper_limit and ul.rate == 0.0
approx(ul.error, 2.302585092994046 / 147.2, 1e-15)

fit = qpburst.weighted_linear_fit(
    [qpburst.FitPoint(1.0, 2.0, 1.0), qpburst.FitPoint(2.0, 4.0, 1.0)],
    fix_intercept_zero=True,
)
approx(fit.p1, 2.0, 1e-12)
approx(fit.chi2, 0.0, 1e-12)
assert fit.intercept_fixed

approx(qpburst.available_time(0.004, 0.001), 0.2501250834, 1e-6)

# --- budget arithmetic ---
entry = qpburst.SourceEntry()
entry.name = "gamma"
entry.type = qpburst.SourceType.flux
entry.coefficient = 0.01
entry.coefficient_err = 0.001
entry.driver = 1.7
entry.driver_err = 0.0
scaled = qpburst.scale_source_rate(entry)
approx(scaled.rate, 0.017, 1e-15)
total = qpburst.total_budget([scaled, scaled])
approx(total.rate, 0.034, 1e-15)

# --- configuration round trip and error mapping ---
cfg = qpburst.RunConfig()
cfg.apply_json('{"run": {"seed": 9, "label": "smoke"}}')
assert cfg.seed == 9 and cfg.label == "smoke"
text = cfg.to_json_string()
cfg2 = qpburst.RunConfig()
cfg2.apply_json(text)
assert cfg2.to_json_string() == text
assert qpburst.fnv1a_hash(cfg2.to_json_string()) == qpburst.fnv1a_hash(text)

try:
    cfg.apply_json('{"run": {"n_cycles": 0}}')
    raise SystemExit("ConfigError not raised")
except qpburst.ConfigError:
    pass
try:
    qpburst.RunConfig.from_file("/nonexistent/run.json")
    raise SystemExit("ConfigError not raised")
except qpburst.ConfigError:
    pass

# --- in-memory analysis ---
cfg = qpburst.RunConfig()
cfg.n_cycles = 1_000_000
cfg.seed = 7
cfg.sync_selection_geometry()
summary = qpburst.run_analysis(cfg)
assert summary.n_traces == 1
approx(summary.live_time_s, 73.6, 1e-9)
approx(summary.p_g, 0.147293079312, 0.002)
assert summary.selection.n_input == summary.n_triggers
assert summary.rate.n_selected == summary.selection.n_accepted

# fixed thresholds override the measured ones
pinned = qpburst.compute_thresholds(0.118, 73.6)
summary2 = qpburst.run_analysis(cfg, pinned)
assert summary2.thresholds.n_signal_min == 20
assert summary2.thresholds.p_g == 0.118
assert summary2.p_g == summary.p_g  # measurement itself is unchanged

# --- IQ records and discrimination ---
tr = sim.iq_trace(truth, 0, 200_000)
iq = tr.iq
assert isinstance(iq, np.ndarray)
assert iq.shape == (200_000, 2) and iq.dtype == np.float32
res = qpburst.discriminate_trace(tr)
assert res.binary.quality_ok
assert len(res.model.states) == 2
assert res.model.e_index == 0 and res.model.g_index == 1
# the fitted midpoint threshold misidentifies ~6.9% per side (cluster
# separation 2.97), so the stationary ground fraction sits above the
# binary-mode value of 0.1473
approx(res.binary.ground_fraction(), 0.17687479255846025, 0.008)
assert math.isfinite(res.model.theta) and math.isfinite(res.model.threshold)

print("python_smoke: all checks passed")
