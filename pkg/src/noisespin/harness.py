"""Experiment presets, reference comparisons, and report/CSV output.

Each preset runs a noise-model ensemble next to an independent reference
(closed-form two-level solution, density-matrix integration, or an exact
correlation/spectrum target), compares the two pointwise with a tolerance
of max(3 * stderr, floor), and emits a report that always records both the
tolerance used and the measured deviation.

Two-level presets share the coupling-strength constant measured by the
calibrate_gamma preset: the single-noise relaxation rate equals 4 * gamma,
and all mapped rates downstream are multiples of that gamma. Three-level
presets retune their coupling weights by sqrt(gamma_target / gamma) so one
calibration serves every model.

Ensemble sizes default to a quick statistically-meaningful scale; set
NOISESPIN_TEST_SCALE=full (or pass n_traj) for headline-size runs.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import lindblad, models, noisegen
from .models import ModelTopology, InitialStateSpec, level_op
from .noisegen import NoiseParams
from .trajectory import TrajectoryConfig, fit_exponential_decay, run_ensemble

OMEGA_S = 0.1  # central splitting shared by the two-level presets
DEFAULT_SEED = 1234
MIN_TRAJECTORIES = 30  # below this the report flags insufficient statistics

_GAMMA_CACHE: dict = {}


def default_scale() -> str:
    s = os.environ.get("NOISESPIN_TEST_SCALE", "ci").strip().lower()
    return s if s in ("ci", "full") else "ci"


def _default_n_traj(kind: str) -> int:
    full = default_scale() == "full"
    return {
        "fig": 10_000 if full else 2_000,
        "three_level": 1_000 if full else 300,
        "calibrate": 10_000,
        "noise": 10_000,
    }[kind]


# ---------------------------------------------------------------------------
# configuration


_LIST_FIELDS = ("N_values", "N_plus_values", "ctau_values")


@dataclass
class ExperimentConfig:
    """One preset invocation with flat overrides; JSON round-trippable."""

    preset: str
    seed: int | None = None
    n_traj: int | None = None
    workers: int | None = None
    engine: str | None = None
    out_dir: str | None = None
    tau: float | None = None
    dt: float | None = None
    t_max: float | None = None
    record_stride: int | None = None
    gamma: float | None = None
    N_values: list | None = None
    N_plus_values: list | None = None
    ctau_values: list | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ValueError(f"unknown config field {key!r}")
        if "preset" not in data:
            raise ValueError("config needs a 'preset' field")
        cfg = cls(**data)
        if cfg.preset not in PRESETS:
            raise ValueError(
                f"unknown preset {cfg.preset!r}; known: {', '.join(PRESETS)}"
            )
        for name in _LIST_FIELDS:
            v = getattr(cfg, name)
            if v is not None:
                setattr(cfg, name, [float(x) for x in v])
        return cfg

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = v
        return out


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# report containers


@dataclass
class SeriesBundle:
    label: str
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


@dataclass
class Comparison:
    label: str
    max_abs_dev: float
    max_excess: float  # max over points of |dev| - tol; <= 0 passes
    worst_time: float
    tol_floor: float
    n_points: int
    passed: bool


@dataclass
class RunReport:
    preset: str
    seed: int
    scale: str
    engine: str
    n_traj: int
    gamma: float | None
    series: dict = field(default_factory=dict)  # label -> SeriesBundle
    comparisons: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)  # name -> bool
    metrics: dict = field(default_factory=dict)  # name -> float
    notes: list = field(default_factory=list)
    insufficient_statistics: bool = False
    passed: bool = False

    def finalize(self) -> "RunReport":
        ok = all(c.passed for c in self.comparisons) and all(self.checks.values())
        self.passed = bool(ok and not self.insufficient_statistics)
        return self

    def to_json_dict(self) -> dict:
        return {
            "preset": self.preset,
            "seed": self.seed,
            "scale": self.scale,
            "engine": self.engine,
            "n_traj": self.n_traj,
            "gamma": None if self.gamma is None else float(self.gamma),
            "tolerances": {c.label: float(c.tol_floor) for c in self.comparisons},
            "deviations": {c.label: float(c.max_abs_dev) for c in self.comparisons},
            "comparison_excess": {c.label: float(c.max_excess) for c in self.comparisons},
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "metrics": {
                k: (float(v) if math.isfinite(v) else None)
                for k, v in self.metrics.items()
            },
            "notes": list(self.notes),
            "insufficient_statistics": bool(self.insufficient_statistics),
            "pass": bool(self.passed),
        }


def compare_series(
    times_a, mean_a, stderr_a, times_b, mean_b, floor: float, label: str = "series"
) -> Comparison:
    """Pointwise |a - b| against max(3 * stderr_a, floor) on a's grid.

    The reference series b is linearly interpolated onto the overlap of the
    two grids; disjoint grids are an error, not an empty pass.
    """
    ta = np.asarray(times_a, dtype=float)
    tb = np.asarray(times_b, dtype=float)
    ma = np.asarray(mean_a, dtype=float)
    sa = np.zeros_like(ma) if stderr_a is None else np.asarray(stderr_a, dtype=float)
    mb = np.asarray(mean_b, dtype=float)
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    mask = (ta >= lo - 1e-12) & (ta <= hi + 1e-12)
    if not mask.any():
        raise ValueError(f"{label}: time grids do not overlap")
    ref = np.interp(ta[mask], tb, mb)
    dev = np.abs(ma[mask] - ref)
    tol = np.maximum(3.0 * sa[mask], floor)
    excess = dev - tol
    i = int(np.argmax(excess))
    return Comparison(
        label=label,
        max_abs_dev=float(dev.max()),
        max_excess=float(excess[i]),
        worst_time=float(ta[mask][i]),
        tol_floor=float(floor),
        n_points=int(mask.sum()),
        passed=bool((excess <= 1e-15).all()),
    )


def export_csv(path, bundles) -> None:
    """Write aligned series as t,<label>_mean,<label>_stderr columns."""
    bundles = list(bundles)
    if not bundles:
        raise ValueError("nothing to export")
    t = bundles[0].times
    for b in bundles:
        if b.times.shape != t.shape or not np.allclose(b.times, t):
            raise ValueError("export_csv needs a common time grid")
    cols = [t]
    header = ["t"]
    for b in bundles:
        cols += [b.mean, b.stderr]
        header += [f"{b.label}_mean", f"{b.label}_stderr"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % x for x in row) + "\n")


# ---------------------------------------------------------------------------
# curve diagnostics


def monotone_within(mean, stderr, n_sigma: float = 2.0):
    """Is the series monotone toward its final value, within noise?

    Returns (ok, worst_violation): each step against the trend may stick out
    by at most n_sigma combined standard errors.
    """
    m = np.asarray(mean, dtype=float)
    s = np.asarray(stderr, dtype=float)
    sign = 1.0 if m[-1] >= m[0] else -1.0
    steps = sign * np.diff(m)
    allow = n_sigma * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)
    viol = np.maximum(-steps - allow, 0.0)
    return bool((viol <= 0).all()), float(viol.max())


def overshoot_extrema(times, mean, stderr, asymptote: float, n_sigma: float = 3.0):
    """Extrema past the asymptote, i.e. beyond where a monotone relaxation stops.

    The series starts on one side of the asymptote; any local extremum on the
    far side whose distance from the asymptote exceeds n_sigma standard
    errors is reported as (time, value, significance).
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(mean, dtype=float)
    s = np.asarray(stderr, dtype=float)
    side = 1.0 if m[0] >= asymptote else -1.0
    # signed depth below the asymptote on the far side
    depth = side * (asymptote - m)
    out = []
    for k in range(1, len(m) - 1):
        if depth[k] <= 0:
            continue
        if depth[k] >= depth[k - 1] and depth[k] > depth[k + 1]:
            sig = depth[k] / s[k] if s[k] > 0 else math.inf
            if sig >= n_sigma:
                out.append((float(t[k]), float(m[k]), float(sig)))
    return out


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def time_to_epsilon(times, dist, eps: float) -> float:
    """First time the distance curve crosses below eps (linear interpolation)."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(dist, dtype=float)
    below = d <= eps
    if not below.any():
        return math.inf
    k = int(np.argmax(below))
    if k == 0:
        return float(t[0])
    # interpolate the crossing inside the step
    f = (d[k - 1] - eps) / (d[k - 1] - d[k])
    return float(t[k - 1] + f * (t[k] - t[k - 1]))


def _fit_decay_rate(times, mean, stderr, group_means, floor: float, min_signal: float = 10.0):
    """Decay rate with an honest uncertainty from group-subset refits.

    The main weighted fit picks the time window; each statistics group is
    refit over that same window, and the spread across groups gives the
    rate error (falling back to the WLS error when too few groups survive).
    """
    fit = fit_exponential_decay(times, mean, floor, stderr, min_signal)
    excess = np.asarray(mean) - floor
    keep = (excess > 0) & (excess > min_signal * np.asarray(stderr))
    tmin, tmax = float(times[keep][0]), float(times[keep][-1])
    rates = []
    if group_means is not None:
        for g in group_means:
            try:
                fg = fit_exponential_decay(
                    times, g, floor, None, 0.0, t_range=(tmin, tmax)
                )
            except ValueError:
                continue
            rates.append(fg.rate)
    if len(rates) >= 3:
        spread = float(np.std(rates, ddof=1) / math.sqrt(len(rates)))
        se = max(spread, fit.rate_stderr)
    else:
        se = fit.rate_stderr
    return fit.rate, se, (tmin, tmax)


# ---------------------------------------------------------------------------
# shared run helpers


def _resolve_engine_workers(cfg: ExperimentConfig):
    return (cfg.engine or "auto"), (cfg.workers or 1)


def _two_level_initial(central_up, aux_probs):
    central = np.array([1.0, 0.0]) if central_up else np.array([0.0, 1.0])
    return InitialStateSpec(central, list(aux_probs))


def _run(model, initial, noise, t_max, stride, n_traj, seed, observables, engine, workers):
    cfg = TrajectoryConfig(
        model=model,
        initial=initial,
        noise=noise,
        t_max=t_max,
        record_stride=stride,
        n_traj=n_traj,
        master_seed=seed,
        observables=observables,
        engine=engine,
        workers=workers,
    )
    return run_ensemble(cfg)


def _steady_window(times, mean, stderr, frac: float = 0.7):
    """Window-averaged late-time value with a conservative uncertainty."""
    cut = times >= frac * times[-1]
    return float(mean[cut].mean()), float(stderr[cut].max())


def _reweighted(model, gamma_targets, gamma):
    """Copy of the model with per-label weights sqrt(target / calibrated)."""
    terms = []
    for t in model.terms:
        w = math.sqrt(gamma_targets[t.noise_label] / gamma)
        terms.append(models.CouplingTerm(t.noise_label, t.factors, t.topo, w))
    return dataclasses.replace(model, terms=terms)


def calibrated_gamma(engine="auto", workers=1, n_traj=None, seed=None) -> float:
    """Measured coupling constant (cached); see the calibrate_gamma preset."""
    n = n_traj if n_traj is not None else _default_n_traj("calibrate")
    s = DEFAULT_SEED if seed is None else seed
    key = (n, s)
    if key not in _GAMMA_CACHE:
        rep = run_preset("calibrate_gamma", {"engine": engine, "workers": workers,
                                             "n_traj": n, "seed": s})
        if not rep.passed:
            raise RuntimeError("calibration run failed its self-checks")
        _GAMMA_CACHE[key] = rep.gamma
    return _GAMMA_CACHE[key]


# ---------------------------------------------------------------------------
# presets


def _preset_calibrate_gamma(cfg: ExperimentConfig) -> RunReport:
    """Measure gamma from the single-noise relaxation; cross-check with N = 1.

    Both infinite-temperature limits relax <sigma_z> at 4 * gamma: the
    single-noise model has emission and absorption channels at 2 * gamma
    each, and the N = 1 exchange model with one excitation maps to
    N_+ = N_- = 1 and the same pair of rates. The two fitted rates must
    agree within 10%; gamma is a quarter of the single-noise rate.
    """
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("calibrate")
    tau = cfg.tau if cfg.tau is not None else 1e-3
    dt = cfg.dt if cfg.dt is not None else 1e-4
    t_max = cfg.t_max if cfg.t_max is not None else 1.0
    stride = cfg.record_stride if cfg.record_stride is not None else 20
    k = round(t_max / dt)
    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=k)

    rep = RunReport("calibrate_gamma", seed, default_scale(), engine, n, None)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        rep.notes.append(f"n_traj={n} is too small for rate fits")
        return rep.finalize()

    single = models.build_single_noise_model(OMEGA_S)
    init_single = _two_level_initial(True, [])
    st_single = _run(single, init_single, noise, t_max, stride, n, seed,
                     ("sigma_z",), engine, workers)
    sz = st_single.series("sigma_z")
    r_single, se_single, win = _fit_decay_rate(
        sz.times, sz.mean, sz.stderr, st_single.group_series("sigma_z"), 0.0
    )

    topo = ModelTopology(2, (2,))
    pair = models.build_central_spin_model(OMEGA_S, topo)
    init_pair = _two_level_initial(True, [0.0])
    st_pair = _run(pair, init_pair, noise, t_max, stride, n, seed + 1,
                   ("sigma_z", "n_plus"), engine, workers)
    pz = st_pair.series("sigma_z")
    r_pair, se_pair, _ = _fit_decay_rate(
        pz.times, pz.mean, pz.stderr, st_pair.group_series("sigma_z"), 0.0
    )

    gamma = r_single / 4.0
    gamma_pair = r_pair / 4.0
    rel = abs(r_single - r_pair) / r_single

    end_single, end_se = _steady_window(sz.times, sz.mean, sz.stderr)
    end_pair, endp_se = _steady_window(pz.times, pz.mean, pz.stderr)
    rep.gamma = gamma
    rep.engine = st_single.engine
    rep.series["single_noise:sigma_z"] = SeriesBundle("sigma_z", sz.times, sz.mean, sz.stderr)
    rep.series["pair:sigma_z"] = SeriesBundle("sigma_z", pz.times, pz.mean, pz.stderr)
    rep.metrics.update(
        rate_single=r_single, rate_single_stderr=se_single,
        rate_pair=r_pair, rate_pair_stderr=se_pair,
        gamma=gamma, gamma_pair=gamma_pair, gamma_rel_diff=rel,
        fit_window_lo=win[0], fit_window_hi=win[1],
        end_value_single=end_single, end_value_pair=end_pair,
    )
    rep.checks["single_noise_relaxes_to_zero"] = abs(end_single) <= max(3 * end_se, 0.02)
    rep.checks["pair_relaxes_to_zero"] = abs(end_pair) <= max(3 * endp_se, 0.02)
    rep.checks["rates_consistent_10pct"] = rel <= 0.10
    rep.checks["n_plus_conserved"] = bool(
        np.abs(st_pair.series("n_plus").mean - 1.0).max() < 1e-6
    )
    rep.notes.append(
        "gamma is a quarter of the single-noise relaxation rate; the N = 1 "
        "exchange model must reproduce the same rate"
    )
    return rep.finalize()


def _gamma_for(cfg: ExperimentConfig, engine, workers) -> float:
    if cfg.gamma is not None:
        return cfg.gamma
    return calibrated_gamma(engine, workers)


def _preset_fig2a(cfg: ExperimentConfig) -> RunReport:
    """Relaxation for N in {2, 3, 5} with one excitation; reference: mapped rates."""
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("fig")
    tau = cfg.tau if cfg.tau is not None else 1e-3
    dt = cfg.dt if cfg.dt is not None else 1e-4
    t_max = cfg.t_max if cfg.t_max is not None else 1.0
    stride = cfg.record_stride if cfg.record_stride is not None else 100
    Ns = [int(x) for x in (cfg.N_values or (2, 3, 5))]
    gamma = _gamma_for(cfg, engine, workers)

    rep = RunReport("fig2a", seed, default_scale(), engine, n, gamma)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        rep.notes.append(f"n_traj={n} gives no meaningful error bars")
        return rep.finalize()
    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=round(t_max / dt))
    for N in Ns:
        topo = ModelTopology(2, (2,) * N)
        model = models.build_central_spin_model(OMEGA_S, topo)
        init = _two_level_initial(True, [0.0] * N)
        st = _run(model, init, noise, t_max, stride, n, seed, ("sigma_z", "n_plus"),
                  engine, workers)
        rep.engine = st.engine
        sz = st.series("sigma_z")
        rates = models.map_rates_two_level(gamma, 1.0, float(N))
        ref_z, _ = lindblad.analytic_two_level(
            rates.Gamma_e, rates.Gamma_a, OMEGA_S, 1.0, 0.0, sz.times
        )
        rep.series[f"N={N}:sigma_z"] = SeriesBundle("sigma_z", sz.times, sz.mean, sz.stderr)
        rep.series[f"N={N}:sigma_z_ref"] = SeriesBundle(
            "sigma_z_ref", sz.times, ref_z, np.zeros_like(ref_z)
        )
        rep.comparisons.append(
            compare_series(sz.times, sz.mean, sz.stderr, sz.times, ref_z, 0.02,
                           label=f"N={N}:sigma_z")
        )
        target = -(N - 1.0) / (N + 1.0)
        steady, _ = _steady_window(sz.times, sz.mean, sz.stderr)
        rep.metrics[f"N={N}:steady"] = steady
        rep.metrics[f"N={N}:steady_target"] = target
        rep.checks[f"N={N}:steady_within_0.03"] = abs(steady - target) <= 0.03
        rep.checks[f"N={N}:n_plus_conserved"] = bool(
            np.abs(st.series("n_plus").mean - 1.0).max() < 1e-6
        )
    return rep.finalize()


def _preset_fig2b(cfg: ExperimentConfig) -> RunReport:
    """N = 2 with fractional excitation via aux superpositions."""
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("fig")
    tau = cfg.tau if cfg.tau is not None else 1e-3
    dt = cfg.dt if cfg.dt is not None else 1e-4
    t_max = cfg.t_max if cfg.t_max is not None else 1.0
    stride = cfg.record_stride if cfg.record_stride is not None else 100
    cases = [float(x) for x in (cfg.N_plus_values or (0.5, 1.0, 1.5, 1.75))]
    gamma = _gamma_for(cfg, engine, workers)
    N = 2

    rep = RunReport("fig2b", seed, default_scale(), engine, n, gamma)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()
    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=round(t_max / dt))
    for n_plus in cases:
        if not (0.0 <= n_plus <= N + 1.0):
            raise ValueError(f"N_plus={n_plus} outside [0, {N + 1}]")
        central_up = n_plus >= 1.0
        aux_total = n_plus - (1.0 if central_up else 0.0)
        p_aux = aux_total / N
        init = _two_level_initial(central_up, [p_aux] * N)
        model = models.build_central_spin_model(OMEGA_S, ModelTopology(2, (2,) * N))
        st = _run(model, init, noise, t_max, stride, n, seed, ("sigma_z", "n_plus"),
                  engine, workers)
        rep.engine = st.engine
        sz = st.series("sigma_z")
        rates = models.map_rates_two_level(gamma, n_plus, N + 1.0 - n_plus)
        rho_z0 = 1.0 if central_up else -1.0
        ref_z, _ = lindblad.analytic_two_level(
            rates.Gamma_e, rates.Gamma_a, OMEGA_S, rho_z0, 0.0, sz.times
        )
        key = f"N+={n_plus:g}"
        rep.series[f"{key}:sigma_z"] = SeriesBundle("sigma_z", sz.times, sz.mean, sz.stderr)
        rep.series[f"{key}:sigma_z_ref"] = SeriesBundle(
            "sigma_z_ref", sz.times, ref_z, np.zeros_like(ref_z)
        )
        rep.comparisons.append(
            compare_series(sz.times, sz.mean, sz.stderr, sz.times, ref_z, 0.02,
                           label=f"{key}:sigma_z")
        )
        steady, _ = _steady_window(sz.times, sz.mean, sz.stderr)
        rep.metrics[f"{key}:steady"] = steady
        rep.metrics[f"{key}:steady_target"] = rates.rho_z_steady
        rep.checks[f"{key}:steady_within_0.03"] = abs(steady - rates.rho_z_steady) <= 0.03
        rep.checks[f"{key}:n_plus_conserved"] = bool(
            np.abs(st.series("n_plus").mean - n_plus).max() < 1e-6
        )
    if any(abs(c - 1.75) < 1e-12 for c in cases):
        rep.notes.append(
            "N+=1.75 drives the steady state positive (+1/6): more absorption "
            "than emission, outside any thermal-bath description"
        )
    return rep.finalize()


def _preset_fig2c(cfg: ExperimentConfig) -> RunReport:
    """Coherence decay: measured rate tracks gamma * N, not gamma * (N + 1)."""
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("fig")
    tau = cfg.tau if cfg.tau is not None else 1e-3
    dt = cfg.dt if cfg.dt is not None else 1e-4
    t_max = cfg.t_max if cfg.t_max is not None else 1.2
    stride = cfg.record_stride if cfg.record_stride is not None else 100
    Ns = [int(x) for x in (cfg.N_values or (2, 3, 5))]
    gamma = _gamma_for(cfg, engine, workers)

    rep = RunReport("fig2c", seed, default_scale(), engine, n, gamma)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()
    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=round(t_max / dt))
    plus_x = np.array([1.0, 1.0]) / math.sqrt(2.0)
    for N in Ns:
        model = models.build_central_spin_model(OMEGA_S, ModelTopology(2, (2,) * N))
        init = InitialStateSpec(plus_x, [0.0] * N)
        st = _run(model, init, noise, t_max, stride, n, seed,
                  ("sigma_x", "sigma_plus_re", "sigma_plus_im", "n_plus"),
                  engine, workers)
        rep.engine = st.engine
        re, im = st.series("sigma_plus_re"), st.series("sigma_plus_im")
        mag = np.hypot(re.mean, im.mean)
        safe = np.maximum(mag, 1e-300)
        mag_se = np.sqrt((re.mean * re.stderr) ** 2 + (im.mean * im.stderr) ** 2) / safe
        g_re = st.group_series("sigma_plus_re")
        g_im = st.group_series("sigma_plus_im")
        g_mag = np.hypot(g_re, g_im)
        rate, rate_se, win = _fit_decay_rate(re.times, mag, mag_se, g_mag, 0.0)
        expect = gamma * N
        naive = gamma * (N + 1.0)
        key = f"N={N}"
        rep.series[f"{key}:sigma_plus_abs"] = SeriesBundle(
            "sigma_plus_abs", re.times, mag, mag_se
        )
        rep.series[f"{key}:sigma_plus_abs_naive"] = SeriesBundle(
            "sigma_plus_abs_naive", re.times, 0.5 * np.exp(-naive * re.times),
            np.zeros_like(re.times),
        )
        sx = st.series("sigma_x")
        rep.series[f"{key}:sigma_x"] = SeriesBundle("sigma_x", sx.times, sx.mean, sx.stderr)
        rep.metrics[f"{key}:rate"] = rate
        rep.metrics[f"{key}:rate_stderr"] = rate_se
        rep.metrics[f"{key}:rate_over_gammaN"] = rate / expect
        rep.metrics[f"{key}:sigmas_from_naive"] = abs(rate - naive) / rate_se
        rep.checks[f"{key}:rate_matches_gammaN_10pct"] = abs(rate - expect) <= 0.10 * expect
        rep.checks[f"{key}:excludes_gammaN+1_3sigma"] = abs(rate - naive) >= 3.0 * rate_se
    rep.notes.append(
        "the naive mapped coherence rate gamma*(N+1) overestimates the decay; "
        "the measured rate follows gamma*N"
    )
    return rep.finalize()


_FIG2D_GRID = {
    # ctau -> (dt, t_max, stride)
    1e-3: (1e-4, 1.0, 100),
    1e-2: (1e-4, 2.0, 200),
    1e-1: (1e-3, 5.0, 50),
    1.0: (1e-2, 14.0, 5),
}


def _preset_fig2d(cfg: ExperimentConfig) -> RunReport:
    """Memory-time sweep at N = 2: monotone decay turns into oscillations."""
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("fig")
    ctaus = [float(x) for x in (cfg.ctau_values or ([cfg.tau] if cfg.tau else None)
                                or (1e-3, 1e-2, 1e-1, 1.0))]
    N = 2

    rep = RunReport("fig2d", seed, default_scale(), engine, n, None)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()
    model = models.build_central_spin_model(OMEGA_S, ModelTopology(2, (2,) * N))
    init = _two_level_initial(True, [0.0] * N)
    asym = -1.0 / 3.0  # one excitation among three sites
    for ctau in ctaus:
        if ctau in _FIG2D_GRID:
            dt, t_max, stride = _FIG2D_GRID[ctau]
        else:
            dt = ctau / 100.0
            t_max = max(1.0, 14.0 * ctau)
            stride = max(1, round(t_max / dt / 200))
        dt = cfg.dt if cfg.dt is not None else dt
        t_max = cfg.t_max if cfg.t_max is not None else t_max
        stride = cfg.record_stride if cfg.record_stride is not None else stride
        noise = NoiseParams(tau=ctau, c=1.0, dt=dt, n_steps=round(t_max / dt))
        st = _run(model, init, noise, t_max, stride, n, seed, ("sigma_z",),
                  engine, workers)
        rep.engine = st.engine
        sz = st.series("sigma_z")
        key = f"ctau={ctau:g}"
        rep.series[f"{key}:sigma_z"] = SeriesBundle("sigma_z", sz.times, sz.mean, sz.stderr)
        mono, worst = monotone_within(sz.mean, sz.stderr, 2.0)
        ext = overshoot_extrema(sz.times, sz.mean, sz.stderr, asym, 3.0)
        rep.metrics[f"{key}:monotone_violation"] = worst
        rep.metrics[f"{key}:n_extrema"] = float(len(ext))
        if ext:
            deepest = max(e[2] for e in ext)
            depth = max(abs(e[1] - asym) for e in ext)
            rep.metrics[f"{key}:extremum_sigmas"] = deepest
            rep.metrics[f"{key}:extremum_depth"] = depth
        # gates sit at the sweep's ends; the crossover region is recorded only
        if ctau <= 1e-3:
            rep.checks[f"{key}:monotone"] = mono
        elif ctau >= 1e-1 - 1e-12:
            rep.checks[f"{key}:oscillates"] = len(ext) >= 1
    d_small = rep.metrics.get("ctau=0.1:extremum_depth")
    d_large = rep.metrics.get("ctau=1:extremum_depth")
    if d_small is not None and d_large is not None:
        rep.checks["oscillation_grows_with_memory"] = d_large > d_small
    rep.notes.append(
        "short memory relaxes monotonically; long memory overshoots the "
        "-1/3 asymptote and rings before settling"
    )
    return rep.finalize()


def _preset_fig3(cfg: ExperimentConfig) -> RunReport:
    """Noise self-test: exponential correlation and Lorentzian spectrum."""
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("noise")
    ctaus = [float(x) for x in (cfg.ctau_values or (1.0, 1e-1, 1e-2, 1e-3))]

    rep = RunReport("fig3", seed, default_scale(), "host", n, None)
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()
    for ctau in ctaus:
        dt = cfg.dt if cfg.dt is not None else ctau / 64.0
        n_steps = 4096
        params = NoiseParams(tau=ctau, c=1.0, dt=dt, n_steps=n_steps)
        ens = noisegen.gen_real_ensemble(params, seed, n)
        lags = np.arange(n_steps + 1) * dt
        n_cut = int(np.searchsorted(lags, 3.0 * ctau, side="right"))
        # single-origin products on the compared window only (memory)
        prods = ens[:, :n_cut] * ens[:, :1]
        c0 = prods[:, 0].mean()
        corr = prods.mean(axis=0) / c0
        corr_se = prods.std(axis=0, ddof=1) / (abs(c0) * math.sqrt(n))
        target = np.exp(-lags[:n_cut] / ctau)
        key = f"ctau={ctau:g}"
        rep.series[f"{key}:corr"] = SeriesBundle("corr", lags[:n_cut], corr, corr_se)
        rep.series[f"{key}:corr_ref"] = SeriesBundle(
            "corr_ref", lags[:n_cut], target, np.zeros(n_cut)
        )
        dev = np.abs(corr - target)
        rep.comparisons.append(
            Comparison(
                label=f"{key}:corr",
                max_abs_dev=float(dev.max()),
                max_excess=float(dev.max() - 0.05),
                worst_time=float(lags[:n_cut][np.argmax(dev)]),
                tol_floor=0.05,
                n_points=n_cut,
                passed=bool(dev.max() < 0.05),
            )
        )
        # average the periodogram over path blocks to bound peak memory
        omega = None
        s = None
        for block in np.array_split(ens, max(1, n // 1000)):
            w, sk = noisegen.estimate_spectrum(block, params)
            part = sk * (block.shape[0] / n)
            omega, s = w, (part if s is None else s + part)
        w_half = noisegen.lorentzian_halfpoint(omega, s)
        rep.metrics[f"{key}:half_power_times_tau"] = w_half * ctau
        rep.checks[f"{key}:half_power_within_10pct"] = abs(w_half * ctau - 1.0) <= 0.10
    rep.notes.append("correlation gate is a flat 0.05 band out to three memory times")
    return rep.finalize()


def _preset_neg_temp(cfg: ExperimentConfig) -> RunReport:
    """Two pumped transitions invert the lower-level populations.

    The hot group pumps 1<->3 and the cold group 2<->3 with occupations from
    two different bath temperatures; the steady state then carries more
    population in level 2 than level 1. A single temperature cannot do this:
    with every group thermal at the same beta the target state is exactly
    Gibbs, so the preset uses beta_H < beta_C.
    """
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("three_level")
    tau = cfg.tau if cfg.tau is not None else 1e-2
    dt = cfg.dt if cfg.dt is not None else 1e-3
    t_max = cfg.t_max if cfg.t_max is not None else 11.0
    stride = cfg.record_stride if cfg.record_stride is not None else 50
    gamma = _gamma_for(cfg, engine, workers)

    E_H, E_C = 2.0, 1.0
    beta_H, beta_C = 0.25, 1.0
    Gamma_H = Gamma_C = 0.5
    M_H, M_C = 2, 3
    N_H = models.bose_occupation(beta_H, E_H)
    N_C = models.bose_occupation(beta_C, E_C)
    nr = models.map_rates_negative_temp(Gamma_H, Gamma_C, N_H, N_C, M_H, M_C)

    rep = RunReport("neg_temp", seed, default_scale(), engine, n, gamma)
    rep.metrics.update(
        N_H=N_H, N_C=N_C, m_H=nr.m_H, m_C=nr.m_C,
        gamma_H=nr.gamma_H, gamma_C=nr.gamma_C,
    )
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()

    model = models.build_negative_temp_model(E_H, E_C, M_H, M_C)
    targets = {}
    for t in model.terms:
        group = "H" if t.noise_label < M_H else "C"
        targets[t.noise_label] = nr.gamma_H if group == "H" else nr.gamma_C
    model = _reweighted(model, targets, gamma)

    q_H = nr.m_H / M_H
    q_C = nr.m_C / M_C
    aux = [np.array([math.sqrt(q_H), math.sqrt(1 - q_H), 0.0])] * M_H
    aux += [np.array([math.sqrt(q_C), math.sqrt(1 - q_C), 0.0])] * M_C
    init = InitialStateSpec(np.array([0.0, 0.0, 1.0]), aux)

    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=round(t_max / dt))
    st = _run(model, init, noise, t_max, stride, n, seed,
              ("pop1", "pop2", "pop3", "m_H", "m_C"), engine, workers)
    rep.engine = st.engine

    hs = np.diag([0.0, E_H - E_C, E_H]).astype(np.complex128)
    jumps = [
        (level_op(3, 1, 3), Gamma_H * (N_H + 1.0)),
        (level_op(3, 3, 1), Gamma_H * N_H),
        (level_op(3, 2, 3), Gamma_C * (N_C + 1.0)),
        (level_op(3, 3, 2), Gamma_C * N_C),
    ]
    spec = lindblad.LindbladSpec(hs, jumps)
    rho0 = np.diag([0.0, 0.0, 1.0]).astype(np.complex128)
    ref = lindblad.integrate(spec, rho0, st.times)
    ref_pops = np.array([[dm.population(l) for dm in ref] for l in (1, 2, 3)])

    for i, name in enumerate(("pop1", "pop2", "pop3")):
        s = st.series(name)
        rep.series[name] = SeriesBundle(name, s.times, s.mean, s.stderr)
        rep.series[f"{name}_ref"] = SeriesBundle(
            f"{name}_ref", s.times, ref_pops[i], np.zeros_like(ref_pops[i])
        )
        rep.comparisons.append(
            compare_series(s.times, s.mean, s.stderr, s.times, ref_pops[i], 0.05,
                           label=name)
        )
    p1_end, _ = _steady_window(st.times, st.series("pop1").mean, st.series("pop1").stderr)
    p2_end, _ = _steady_window(st.times, st.series("pop2").mean, st.series("pop2").stderr)
    rep.metrics.update(
        lindblad_p1_end=float(ref_pops[0, -1]), lindblad_p2_end=float(ref_pops[1, -1]),
        noise_p1_end=p1_end, noise_p2_end=p2_end,
        inversion_margin=float(ref_pops[1, -1] - ref_pops[0, -1]),
    )
    rep.checks["lindblad_inversion"] = bool(ref_pops[1, -1] > ref_pops[0, -1])
    rep.checks["noise_inversion"] = bool(p2_end > p1_end)
    rep.checks["m_H_conserved"] = bool(
        np.abs(st.series("m_H").mean - nr.m_H).max() < 1e-6
    )
    rep.checks["m_C_conserved"] = bool(
        np.abs(st.series("m_C").mean - nr.m_C).max() < 1e-6
    )
    rep.notes.append(
        "pump occupations come from two bath temperatures (0.25 and 1.0 in "
        "inverse energy units); a single temperature makes the target exactly "
        "thermal and no inversion is possible"
    )
    return rep.finalize()


QUENCH_E2, QUENCH_E3 = 0.35, 0.69
QUENCH_BETA = 1.0
QUENCH_M = {(2, 1): 3, (3, 2): 0, (3, 1): 2}
QUENCH_GAMMAS = (0.03, 0.0, 0.3)  # (21, 32, 31) pair strengths
QUENCH_B_HOT = 0.2


def quench_occupancies() -> tuple:
    """Detailed-balance occupations (m_1, m_2, m_3) for the driven pairs.

    Thermal targets need (m_p + 1)/(m_q + 1) = e^{beta (E_q - E_p)} with
    energies (0, E2, E3). The overall scale is pinned so the strongly
    driven 31-set is exactly filled by its required occupancies, leaving
    no inert weight on its sites.
    """
    x = (QUENCH_M[(3, 1)] + 1.0) / (math.exp(QUENCH_BETA * QUENCH_E3) + 1.0)
    return (x * math.exp(QUENCH_BETA * QUENCH_E3) - 1.0,
            x * math.exp(QUENCH_BETA * (QUENCH_E3 - QUENCH_E2)) - 1.0,
            x - 1.0)


def quench_equilibrium() -> np.ndarray:
    e = np.array([0.0, QUENCH_E2, QUENCH_E3])
    w = np.exp(-QUENCH_BETA * e)
    return w / w.sum()


def thermal_populations(b: float) -> np.ndarray:
    e = np.array([0.0, QUENCH_E2, QUENCH_E3])
    w = np.exp(-b * e)
    return w / w.sum()


def solve_equidistant_b(d0: float, lo: float = 1.0 + 1e-6, hi: float = 30.0) -> float:
    """Inverse temperature on the cold side matching a hot-side distance."""
    pi = quench_equilibrium()

    def f(b):
        return tv_distance(thermal_populations(b), pi) - d0

    return float(brentq(f, lo, hi, xtol=1e-12))


def transport_occupancies(T1: float, T2: float, T3: float) -> dict:
    """Split per-level totals across the three auxiliary sets.

    The 21-set holds levels {1,2}, the 32-set {2,3}, the 31-set {1,3} (set
    sizes 2, 1, 2). One degree of freedom remains (the level-1 occupancy
    `a` of the 21-set); the midpoint of its feasible interval is chosen.
    """
    m21, m32, m31 = 2.0, 1.0, 2.0
    if abs((T1 + T2 + T3) - (m21 + m32 + m31)) > 1e-9:
        raise ValueError("level totals must sum to the number of auxiliary sites")
    lo = max(0.0, m21 - T2, T1 - m31)
    hi = min(m21, T1, m21 + m32 - T2)
    if lo > hi + 1e-12:
        raise ValueError(f"no feasible split for totals ({T1:.4f},{T2:.4f},{T3:.4f})")
    a = 0.5 * (lo + hi)
    occ = {
        "21_lvl1": a,
        "21_lvl2": m21 - a,
        "32_lvl2": T2 - (m21 - a),
        "31_lvl1": T1 - a,
    }
    occ["32_lvl3"] = m32 - occ["32_lvl2"]
    occ["31_lvl3"] = m31 - occ["31_lvl1"]
    for k, v in occ.items():
        cap = m32 if k.startswith("32") else 2.0
        if v < -1e-12 or v > cap + 1e-12:
            raise ValueError(f"occupancy {k}={v:.4f} out of range")
    return occ


def _quench_initial(central_level: int, ms) -> InitialStateSpec:
    totals = [ms[p] + (1.0 if p == central_level - 1 else 0.0) for p in range(3)]
    occ = transport_occupancies(*totals)
    central = np.zeros(3)
    central[central_level - 1] = 1.0
    q21 = occ["21_lvl1"] / 2.0
    q32 = occ["32_lvl2"] / 1.0
    q31 = occ["31_lvl1"] / 2.0
    aux = [np.array([math.sqrt(q21), math.sqrt(1 - q21), 0.0])] * 2
    aux += [np.array([0.0, math.sqrt(q32), math.sqrt(1 - q32)])]
    aux += [np.array([math.sqrt(q31), 0.0, math.sqrt(1 - q31)])] * 2
    return InitialStateSpec(central, aux)


def _allocate(n: int, weights) -> list:
    """Deterministic largest-remainder split of n trajectories."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    base = np.floor(n * w).astype(int)
    base = np.maximum(base, 1)
    while base.sum() > n:
        base[int(np.argmax(base))] -= 1
    rem = n * w - base
    while base.sum() < n:
        k = int(np.argmax(rem))
        base[k] += 1
        rem[k] = -1
    return base.tolist()


def _run_mixture(model, weights, inits, noise, t_max, stride, n, seed, observables,
                 engine, workers):
    """Weighted average of sub-ensembles, one per mixture component."""
    alloc = _allocate(n, weights)
    mean = None
    var = None
    times = None
    eng = engine
    for p, (w, init, n_p) in enumerate(zip(weights, inits, alloc)):
        st = _run(model, init, noise, t_max, stride, n_p, seed * 1_000_003 + p,
                  observables, engine, workers)
        eng = st.engine
        if mean is None:
            times = st.times
            mean = w * st.mean
            var = (w * st.stderr) ** 2
        else:
            mean += w * st.mean
            var += (w * st.stderr) ** 2
    return times, mean, np.sqrt(var), eng


def _preset_quench(cfg: ExperimentConfig) -> RunReport:
    """Equidistant hot and cold starts relax at visibly different speeds."""
    engine, workers = _resolve_engine_workers(cfg)
    seed = cfg.seed if cfg.seed is not None else DEFAULT_SEED
    n = cfg.n_traj if cfg.n_traj is not None else _default_n_traj("three_level")
    tau = cfg.tau if cfg.tau is not None else 1e-2
    dt = cfg.dt if cfg.dt is not None else 1e-3
    t_max = cfg.t_max if cfg.t_max is not None else 6.0
    stride = cfg.record_stride if cfg.record_stride is not None else 50
    gamma = _gamma_for(cfg, engine, workers)

    ms = models.thermal_occupancies_quench(QUENCH_BETA, QUENCH_E2, QUENCH_E3, 5)
    qr = models.map_rates_quench(QUENCH_GAMMAS, ms)
    pi = quench_equilibrium()
    p_hot = thermal_populations(QUENCH_B_HOT)
    d0 = tv_distance(p_hot, pi)
    b_cold = solve_equidistant_b(d0)
    p_cold = thermal_populations(b_cold)
    eps = d0 / 10.0

    rep = RunReport("quench", seed, default_scale(), engine, n, gamma)
    rep.metrics.update(
        m1=ms[0], m2=ms[1], m3=ms[2], d0=d0, epsilon=eps, b_cold=b_cold,
    )
    if n < MIN_TRAJECTORIES:
        rep.insufficient_statistics = True
        return rep.finalize()

    model = models.build_quench_model(QUENCH_E2, QUENCH_E3, QUENCH_M)
    pair_gamma = dict(zip(models.QUENCH_PAIRS, QUENCH_GAMMAS))
    targets = {}
    for t in model.terms:
        for key, sites in model.site_groups.items():
            if t.factors[1][0] in sites:
                pair = (int(key[0]), int(key[1]))
                targets[t.noise_label] = pair_gamma[pair]
    model = _reweighted(model, targets, gamma)

    hs = np.diag([0.0, QUENCH_E2, QUENCH_E3]).astype(np.complex128)
    jumps = [(level_op(3, p, q), g) for (p, q), g in qr.all_rates().items()]
    spec = lindblad.LindbladSpec(hs, jumps)
    noise = NoiseParams(tau=tau, c=1.0, dt=dt, n_steps=round(t_max / dt))
    observables = ("pop1", "pop2", "pop3", "k1", "k2", "k3")
    t_eps = {}
    t_half_noise = {}
    for tag, p0 in (("hot", p_hot), ("cold", p_cold)):
        inits = [_quench_initial(lvl, ms) for lvl in (1, 2, 3)]
        times, mean, stderr, eng = _run_mixture(
            model, p0, inits, noise, t_max, stride, n,
            seed + (0 if tag == "hot" else 1), observables, engine, workers,
        )
        rep.engine = eng
        ref = lindblad.integrate(spec, np.diag(p0).astype(np.complex128), times)
        ref_pops = np.array([[dm.population(l) for dm in ref] for l in (1, 2, 3)])
        for i, name in enumerate(("pop1", "pop2", "pop3")):
            rep.series[f"{tag}:{name}"] = SeriesBundle(name, times, mean[i], stderr[i])
            rep.series[f"{tag}:{name}_ref"] = SeriesBundle(
                f"{name}_ref", times, ref_pops[i], np.zeros_like(times)
            )
            rep.comparisons.append(
                compare_series(times, mean[i], stderr[i], times, ref_pops[i], 0.05,
                               label=f"{tag}:{name}")
            )
        dist_ref = np.array([tv_distance(ref_pops[:, k], pi) for k in range(len(times))])
        t_eps[tag] = time_to_epsilon(times, dist_ref, eps)
        dist_noise = np.array([tv_distance(mean[:3, k], pi) for k in range(len(times))])
        t_half_noise[tag] = time_to_epsilon(times, dist_noise, d0 / 2.0)
        for j, kname in enumerate(("k1", "k2", "k3")):
            idx = observables.index(kname)
            rep.checks[f"{tag}:{kname}_conserved"] = bool(
                np.abs(mean[idx] - ms[j]).max() < 1e-6
            )
    ratio = t_eps["cold"] / t_eps["hot"]
    rep.metrics.update(
        t_eps_hot=t_eps["hot"], t_eps_cold=t_eps["cold"], relaxation_ratio=ratio,
        t_half_noise_hot=t_half_noise["hot"], t_half_noise_cold=t_half_noise["cold"],
    )
    rep.checks["lindblad_ratio_ge_1.2"] = bool(
        math.isfinite(ratio) and ratio >= 1.2
    )
    rep.checks["noise_cold_slower_than_hot"] = bool(
        t_half_noise["cold"] > t_half_noise["hot"]
    )
    rep.notes.append(
        "the two starts sit at the same total-variation distance from "
        "equilibrium; the colder one relaxes uphill and takes longer"
    )
    return rep.finalize()


PRESETS = {
    "fig2a": ("relaxation of <sigma_z> for N in {2,3,5}, one excitation",
              _preset_fig2a),
    "fig2b": ("fractional excitation numbers via auxiliary superpositions, N = 2",
              _preset_fig2b),
    "fig2c": ("coherence decay rate: gamma*N, not the mapped gamma*(N+1)",
              _preset_fig2c),
    "fig2d": ("memory-time sweep: monotone decay to underdamped oscillation",
              _preset_fig2d),
    "fig3": ("noise generator self-test: correlation and spectrum vs targets",
             _preset_fig3),
    "neg_temp": ("two pumped transitions invert the steady-state populations",
                 _preset_neg_temp),
    "quench": ("equidistant hot/cold starts relax at different speeds",
               _preset_quench),
    "calibrate_gamma": ("measure the coupling constant and cross-check the mapping",
                        _preset_calibrate_gamma),
}


def list_presets() -> list:
    """(name, one-line description) pairs in stable order."""
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def run_preset(name: str, overrides=None) -> RunReport:
    """Execute one preset; `overrides` uses the config-file field names."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    data = dict(overrides or {})
    data["preset"] = name
    cfg = ExperimentConfig.from_dict(data)
    report = PRESETS[name][1](cfg)
    if cfg.out_dir:
        _write_outputs(report, cfg.out_dir)
    return report


def run_from_config(cfg: ExperimentConfig) -> RunReport:
    data = cfg.to_dict()
    name = data.pop("preset")
    return run_preset(name, data)


def _write_outputs(report: RunReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{report.preset}_report.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    by_group: dict = {}
    for key, bundle in report.series.items():
        group, _, label = key.rpartition(":")
        group = group or report.preset
        by_group.setdefault(group, []).append(
            SeriesBundle(label, bundle.times, bundle.mean, bundle.stderr)
        )
    for group, bundles in by_group.items():
        safe = "".join(ch if (ch.isalnum() or ch in "._-") else "_" for ch in group)
        export_csv(os.path.join(out_dir, f"{report.preset}_{safe}.csv"), bundles)
