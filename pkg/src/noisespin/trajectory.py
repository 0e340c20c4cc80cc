"""Trajectory ensembles: average pure-state evolution over noise samples.

A trajectory propagates one pure state through one sampled noise history
with the Hamiltonian held constant across each step. Ensemble statistics
(means, standard errors, group means for honest fit uncertainties) are
accumulated over independent trajectories, each owning an RNG seeded by
(master_seed, trajectory_index) so results do not depend on chunking,
worker count, or execution order.

Propagation happens on the invariant sector generated by the initial
product state, which keeps the hot loop small even for many auxiliary
sites. Observables are evaluated after the kernel runs, in shared numpy
code, so both engines produce bit-identical statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .models import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    InitialStateSpec,
    Model,
    SectorBasis,
    level_op,
    product_support,
)
from .noisegen import NoiseParams
from .numkernel import HERM_TOL, as_complex_matrix, as_state_vector, expm_unitary

DEFAULT_TAYLOR_ORDER = 12
# propagation keeps || |psi| - 1 || at machine level; this is the abort bound
NORM2_TOL = 2e-9


@dataclass
class TrajectoryConfig:
    """Everything needed to reproduce an ensemble bit for bit."""

    model: Model
    initial: InitialStateSpec
    noise: object  # NoiseParams, or one per noise label
    t_max: float
    record_stride: int = 100
    n_traj: int = 1000
    master_seed: int = 0
    observables: tuple = ("sigma_z",)
    engine: str = "auto"
    workers: int = 1
    taylor_order: int = DEFAULT_TAYLOR_ORDER
    n_groups: int = 10

    def __post_init__(self):
        L = self.model.n_labels
        labels = sorted(t.noise_label for t in self.model.terms)
        if labels != list(range(L)):
            raise ValueError("coupling terms must carry noise labels 0..L-1, one each")
        if isinstance(self.noise, NoiseParams):
            self.noise = (self.noise,) * L
        else:
            self.noise = tuple(self.noise)
        if len(self.noise) != L:
            raise ValueError(f"need noise parameters for {L} labels, got {len(self.noise)}")
        dt = self.noise[0].dt
        for p in self.noise:
            if p.dt != dt:
                raise ValueError("all noise labels must share the step size")
        k = round(self.t_max / dt)
        if k < 1 or abs(k * dt - self.t_max) > 1e-9 * max(1.0, k):
            raise ValueError(f"t_max={self.t_max} is not a whole number of steps of dt={dt}")
        if self.record_stride < 1 or k % self.record_stride != 0:
            raise ValueError(
                f"step count {k} must be a positive multiple of record_stride={self.record_stride}"
            )
        for p in self.noise:
            if p.n_steps != k:
                raise ValueError(f"noise n_steps={p.n_steps} but the run needs {k} steps")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.n_groups < 0:
            raise ValueError("n_groups must be >= 0")
        self.observables = tuple(self.observables)
        if not self.observables:
            raise ValueError("need at least one observable")

    @property
    def dt(self) -> float:
        return self.noise[0].dt

    @property
    def n_steps(self) -> int:
        return round(self.t_max / self.dt)

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_records) * (self.record_stride * self.dt)


@dataclass
class ObservableSeries:
    name: str
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int


@dataclass
class EnsembleStats:
    """Ensemble means and uncertainties for every requested observable."""

    times: np.ndarray
    names: tuple
    mean: np.ndarray  # (n_obs, n_rec)
    stderr: np.ndarray
    n_traj: int
    engine: str
    max_norm_drift: float
    group_means: np.ndarray | None = None  # (n_groups, n_obs, n_rec)
    group_counts: np.ndarray | None = None

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"observable {name!r} not recorded (have {self.names})") from None

    def series(self, name: str) -> ObservableSeries:
        j = self.index(name)
        return ObservableSeries(name, self.times, self.mean[j], self.stderr[j], self.n_traj)

    def group_series(self, name: str) -> np.ndarray:
        if self.group_means is None:
            raise ValueError("ensemble was run without group accounting")
        return self.group_means[:, self.index(name), :]


# ---------------------------------------------------------------------------
# observables


def observable_matrix(model: Model, basis: SectorBasis, name: str) -> np.ndarray:
    """Hermitian restricted matrix for a named observable.

    Central-site names: sigma_z / sigma_x / sigma_y / sigma_plus_re /
    sigma_plus_im (two-level) and pop1..popD (any dimension). Counter names
    (n_plus, n_minus, m_H, m_C, k1..k3) follow the conserved quantities of
    the corresponding models and are diagonal in the site-occupation basis.
    """
    cd = model.topo.central_dim
    if name == "sigma_z" and cd == 2:
        return basis.site_matrix(0, SIGMA_Z)
    if name == "sigma_x" and cd == 2:
        return basis.site_matrix(0, SIGMA_X)
    if name == "sigma_y" and cd == 2:
        return basis.site_matrix(0, SIGMA_Y)
    if name == "sigma_plus_re" and cd == 2:
        return basis.site_matrix(0, 0.5 * SIGMA_X)
    if name == "sigma_plus_im" and cd == 2:
        return basis.site_matrix(0, 0.5 * SIGMA_Y)
    if name.startswith("pop") and name[3:].isdigit():
        lvl = int(name[3:])
        if 1 <= lvl <= cd:
            return basis.site_matrix(0, level_op(cd, lvl, lvl))
    diag = _counter_diag(model, basis, name)
    if diag is not None:
        return np.diag(diag.astype(np.complex128))
    raise ValueError(f"unknown observable {name!r} for model {model.name!r}")


def _counter_diag(model: Model, basis: SectorBasis, name: str):
    digits = np.array(basis.states, dtype=np.int64)  # (dim, N+1)
    if model.topo.central_dim == 2 and name in ("n_plus", "n_minus"):
        ups = (digits == 0).sum(axis=1).astype(np.float64)
        return ups if name == "n_plus" else (model.topo.N + 1) - ups
    if model.name == "negative_temp" and name in ("m_H", "m_C"):
        g = name[2]
        sites = list(model.site_groups[g])
        feed = {"H": 0, "C": 1}[g]  # central level index the group pumps from
        return ((digits[:, sites] == 0).sum(axis=1) + (digits[:, 0] == feed)).astype(np.float64)
    if model.name == "quench" and len(name) == 2 and name[0] == "k" and name[1] in "123":
        lvl = int(name[1]) - 1
        aux = (digits[:, 1:] == lvl).sum(axis=1)
        return (aux - (digits[:, 0] == lvl)).astype(np.float64)
    return None


def expectation_values(states: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """<psi|O|psi> for recorded states (B, R, d) and ops (n_obs, d, d).

    Returns (B, n_obs, R) real values. Shared by both engines so that their
    statistics agree bitwise whenever the recorded states do.
    """
    B, R, d = states.shape
    out = np.empty((B, ops.shape[0], R))
    for j in range(ops.shape[0]):
        out[:, j, :] = (states.conj() * (states @ ops[j].T)).sum(axis=-1).real
    return out


# ---------------------------------------------------------------------------
# compilation and execution


@dataclass
class CompiledRun:
    basis: SectorBasis
    cm: _engine.CompiledModel
    ops: np.ndarray  # (n_obs, d, d)


def compile_run(config: TrajectoryConfig) -> CompiledRun:
    model, initial = config.model, config.initial
    basis = SectorBasis.from_support(model, product_support(initial, model.topo))
    L = model.n_labels
    d = basis.dim
    src = np.empty((L, d), dtype=np.int64)
    amp = np.empty((L, d), dtype=np.float64)
    srcT = np.empty((L, d), dtype=np.int64)
    ampT = np.empty((L, d), dtype=np.float64)
    for term in model.terms:
        l = term.noise_label
        src[l], amp[l] = basis.restrict_pattern(term.factors, term.weight)
        srcT[l], ampT[l] = basis.restrict_pattern(term.dagger_factors(), term.weight)
    cm = _engine.CompiledModel(
        dim=d,
        n_labels=L,
        hs=basis.central_diag(model.hs_central),
        src=src,
        amp=amp,
        srcT=srcT,
        ampT=ampT,
        psi0=basis.product_state(initial),
    )
    mats = []
    for name in config.observables:
        m = observable_matrix(model, basis, name)
        if not np.allclose(m, m.conj().T, atol=HERM_TOL):
            raise ValueError(f"observable {name!r} is not Hermitian")
        mats.append(m)
    return CompiledRun(basis, cm, np.stack(mats))


def dense_label_op(cm: _engine.CompiledModel, label: int) -> np.ndarray:
    """Dense matrix of one coupling operator, reassembled from gather form."""
    a = np.zeros((cm.dim, cm.dim), dtype=np.complex128)
    for i in range(cm.dim):
        a[i, cm.src[label, i]] += cm.amp[label, i]
    return a


def run_ensemble(config: TrajectoryConfig) -> EnsembleStats:
    """Propagate n_traj independent trajectories and accumulate statistics.

    The trajectory stream is split into fixed-size chunks whose size depends
    only on the problem shape, and trajectory i goes into statistics group
    i mod n_groups, so the result is a pure function of the configuration.
    """
    engine = _engine.resolve_engine(config.engine)
    _engine.set_workers(engine, config.workers)
    run = compile_run(config)
    K, stride = config.n_steps, config.record_stride
    n_rec = config.n_records
    n_obs = len(config.observables)
    total = np.zeros((n_obs, n_rec))
    total_sq = np.zeros((n_obs, n_rec))
    G = config.n_groups
    g_sum = np.zeros((G, n_obs, n_rec)) if G else None
    g_cnt = np.zeros(G, dtype=np.int64) if G else None
    drift = 0.0
    chunk = _engine.chunk_size(run.cm.dim, run.cm.n_labels, K, n_rec)
    for start in range(0, config.n_traj, chunk):
        idxs = np.arange(start, min(start + chunk, config.n_traj))
        eta = _engine.make_noise_block(config.master_seed, idxs, list(config.noise), K)
        states, dev = _engine.run_chunk(
            engine, run.cm, eta, config.dt, config.taylor_order, stride
        )
        drift = max(drift, float(dev.max()))
        vals = expectation_values(states, run.ops)
        total += vals.sum(axis=0)
        total_sq += (vals * vals).sum(axis=0)
        if G:
            for g in range(G):
                mask = idxs % G == g
                if mask.any():
                    g_sum[g] += vals[mask].sum(axis=0)
                    g_cnt[g] += int(mask.sum())
    if drift > NORM2_TOL:
        raise RuntimeError(
            f"norm drift {drift:.3e} exceeds {NORM2_TOL:.0e}; "
            "the step expansion is not converged for these parameters"
        )
    n = config.n_traj
    mean = total / n
    if n > 1:
        var = np.maximum(total_sq - n * mean**2, 0.0) / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros_like(mean)
    gm = None
    gc = None
    if G:
        gc = g_cnt
        keep = g_cnt > 0
        gm = np.zeros_like(g_sum)
        gm[keep] = g_sum[keep] / g_cnt[keep, None, None]
        gm, gc = gm[keep], gc[keep]
    return EnsembleStats(
        times=config.times,
        names=config.observables,
        mean=mean,
        stderr=stderr,
        n_traj=n,
        engine=engine,
        max_norm_drift=drift,
        group_means=gm,
        group_counts=gc,
    )


def run_trajectory(config: TrajectoryConfig, index: int) -> dict:
    """One trajectory's observable records, bit-identical to its ensemble role."""
    if not (0 <= index):
        raise ValueError("trajectory index must be >= 0")
    engine = _engine.resolve_engine(config.engine)
    run = compile_run(config)
    eta = _engine.make_noise_block(
        config.master_seed, np.array([index]), list(config.noise), config.n_steps
    )
    states, dev = _engine.run_chunk(
        engine, run.cm, eta, config.dt, config.taylor_order, config.record_stride
    )
    if float(dev.max()) > NORM2_TOL:
        raise RuntimeError(f"norm drift {float(dev.max()):.3e} exceeds {NORM2_TOL:.0e}")
    vals = expectation_values(states, run.ops)[0]
    t = config.times
    return {
        name: ObservableSeries(name, t, vals[j].copy(), np.zeros_like(vals[j]), 1)
        for j, name in enumerate(config.observables)
    }


# ---------------------------------------------------------------------------
# single-step reference path


def propagate_step(psi, H, dt: float) -> np.ndarray:
    """Advance one step with the exact exponential; reference for the kernels."""
    psi = as_state_vector(psi)
    U = expm_unitary(H, dt)
    if U.shape[0] != psi.shape[0]:
        raise ValueError("state and Hamiltonian dimensions differ")
    return U @ psi


def observe(psi, op) -> float:
    psi = as_state_vector(psi)
    op = as_complex_matrix(op)
    if not np.allclose(op, op.conj().T, atol=HERM_TOL):
        raise ValueError("observable must be Hermitian")
    if op.shape[0] != psi.shape[0]:
        raise ValueError("state and operator dimensions differ")
    return float(np.real(np.vdot(psi, op @ psi)))


# ---------------------------------------------------------------------------
# decay-rate extraction


@dataclass
class FitResult:
    rate: float
    rate_stderr: float
    amplitude: float
    residual: float
    n_points: int


def fit_exponential_decay(
    times,
    values,
    floor: float = 0.0,
    stderr=None,
    min_signal: float = 10.0,
    t_range=None,
) -> FitResult:
    """Weighted straight-line fit of log(values - floor) against time.

    Points are used only where the excess over the floor is positive and,
    when per-point uncertainties are supplied, at least min_signal standard
    errors above it; that cut controls the bias the log transform picks up
    near the noise level. Weights follow from error propagation through the
    log. With no uncertainties given, points get unit weight and the rate
    uncertainty is scaled from the fit residuals.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be matching 1-d arrays")
    excess = v - floor
    keep = excess > 0
    if stderr is not None:
        se = np.asarray(stderr, dtype=np.float64)
        keep &= excess > min_signal * se
    if t_range is not None:
        lo, hi = t_range
        keep &= (t >= lo) & (t <= hi)
    if keep.sum() < 3:
        raise ValueError(
            f"only {int(keep.sum())} usable points above the floor; cannot fit a rate"
        )
    tk = t[keep]
    y = np.log(excess[keep])
    if stderr is not None:
        sigma_y = se[keep] / excess[keep]
        pos = sigma_y[sigma_y > 0]
        if pos.size:
            # exact points (zero stderr, e.g. the deterministic start) get
            # the largest finite weight instead of an infinite one
            w = 1.0 / np.maximum(sigma_y, pos.min()) ** 2
        else:
            w = np.ones_like(y)
    else:
        w = np.ones_like(y)
    # weighted normal equations for y = a + b t
    sw = w.sum()
    st = (w * tk).sum()
    stt = (w * tk * tk).sum()
    sy = (w * y).sum()
    sty = (w * tk * y).sum()
    det = sw * stt - st * st
    if det <= 0:
        raise ValueError("degenerate time window for the rate fit")
    a = (stt * sy - st * sty) / det
    b = (sw * sty - st * sy) / det
    resid = y - (a + b * tk)
    n = int(keep.sum())
    var_b = sw / det
    if stderr is None and n > 2:
        var_b *= float((w * resid**2).sum() / (n - 2))
    rms = float(np.sqrt((resid**2).mean()))
    return FitResult(
        rate=-b,
        rate_stderr=float(np.sqrt(var_b)),
        amplitude=float(np.exp(a)),
        residual=rms,
        n_points=n,
    )
