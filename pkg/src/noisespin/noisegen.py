"""Ornstein-Uhlenbeck (Johnson) noise generation and spectral estimation.

The generator uses the exact one-step update

    xi(t + dt) = xi(t) e^{-dt/tau} + sqrt((1/(c tau)) (1 - e^{-2 dt/tau})) chi

with chi a standard normal draw, so the discrete path has the continuous
process statistics at the grid points for any step size. Paths are
initialized from the stationary distribution, variance 1/(c tau), which makes
the ensemble correlation a pure exponential (1/(c tau)) e^{-|t'-t|/tau}.

Complex noise is eta = xi_1 + i xi_2 with independent quadratures, each of
stationary variance 1/(c tau).

Seeding is splittable: ensembles derive one child seed per path from
(master_seed, path_index), so results do not depend on generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class NoiseParams:
    """OU parameters: memory time tau, diffusion constant c, step dt.

    All times are in units of 1/c unless the caller chooses otherwise; the
    formulas only ever see the products c*tau and dt/tau.
    """

    tau: float
    c: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def stationary_var(self) -> float:
        return 1.0 / (self.c * self.tau)

    @property
    def resolves_memory(self) -> bool:
        # dt <= tau/10 is required when colored-noise fidelity matters
        return self.dt <= self.tau / 10 + 1e-15

    def decay_coeffs(self) -> tuple[float, float]:
        """(alpha, beta) with xi' = alpha xi + beta chi."""
        alpha = float(np.exp(-self.dt / self.tau))
        beta = float(np.sqrt(self.stationary_var * (1.0 - alpha * alpha)))
        return alpha, beta


@dataclass
class RealNoisePath:
    values: np.ndarray  # length n_steps + 1
    params: NoiseParams
    seed: object = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.params.n_steps + 1,):
            raise ValueError(
                f"path length {self.values.shape} does not match "
                f"n_steps + 1 = {self.params.n_steps + 1}"
            )

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.params.n_steps + 1) * self.params.dt


@dataclass
class ComplexNoisePath:
    values: np.ndarray  # complex, length n_steps + 1
    params: NoiseParams
    seed: object = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.params.n_steps + 1) * self.params.dt


@dataclass
class CorrelationEstimate:
    lags: np.ndarray
    values: np.ndarray
    n_samples: int

    def normalized(self) -> "CorrelationEstimate":
        if self.values[0] <= 0:
            raise ValueError("cannot normalize: C(0) <= 0")
        return CorrelationEstimate(self.lags, self.values / self.values[0], self.n_samples)


def ou_init(params: NoiseParams, rng) -> float:
    """Stationary initial draw xi(0) = chi / sqrt(c tau)."""
    return float(rng.standard_normal()) * np.sqrt(params.stationary_var)


def ou_step(xi: float, params: NoiseParams, chi: float) -> float:
    """One exact OU update; chi must be a standard normal draw."""
    alpha, beta = params.decay_coeffs()
    return alpha * xi + beta * chi


def ou_chain(params: NoiseParams, xi0, chi) -> np.ndarray:
    """Vectorized exact OU recursion.

    xi0 has any shape (...,); chi has shape (..., n) of standard normals.
    Returns (..., n + 1) with [..., 0] = xi0 and each later column one
    ou_step application. This is the single implementation point shared by
    the path generators here and the trajectory engine's noise block; it is
    bit-identical to looping ou_step.
    """
    xi0 = np.asarray(xi0, dtype=np.float64)
    chi = np.asarray(chi, dtype=np.float64)
    alpha, beta = params.decay_coeffs()
    # direct-form IIR: y[k] = beta*chi[k] + alpha*y[k-1], y[-1] := xi0
    zi = (alpha * xi0)[..., np.newaxis]
    tail, _ = lfilter([beta], [1.0, -alpha], chi, axis=-1, zi=zi)
    return np.concatenate([xi0[..., np.newaxis], tail], axis=-1)


def _rng_for(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_real_path(params: NoiseParams, seed) -> RealNoisePath:
    rng = _rng_for(seed)
    xi0 = np.sqrt(params.stationary_var) * rng.standard_normal()
    chi = rng.standard_normal(params.n_steps)
    return RealNoisePath(ou_chain(params, xi0, chi), params, seed=seed)


def gen_complex_path(params: NoiseParams, seed) -> ComplexNoisePath:
    """eta = xi_1 + i xi_2 from two independent stationary OU paths.

    Deterministic given (params, seed); the two quadratures consume the
    stream in a fixed order (both initial draws, then both chi blocks).
    """
    rng = _rng_for(seed)
    xi0 = np.sqrt(params.stationary_var) * rng.standard_normal(2)
    chi = rng.standard_normal((2, params.n_steps))
    xi = ou_chain(params, xi0, chi)
    return ComplexNoisePath(xi[0] + 1j * xi[1], params, seed=seed)


def gen_real_ensemble(params: NoiseParams, master_seed, n_paths: int) -> np.ndarray:
    """(n_paths, n_steps + 1) stationary OU paths, seeded per (master, index)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    xi0 = np.empty(n_paths)
    chi = np.empty((n_paths, params.n_steps))
    for k in range(n_paths):
        rng = np.random.default_rng(np.random.SeedSequence((master_seed, k)))
        xi0[k] = rng.standard_normal()
        chi[k] = rng.standard_normal(params.n_steps)
    xi0 *= np.sqrt(params.stationary_var)
    return ou_chain(params, xi0, chi)


def estimate_correlation(paths, params: NoiseParams | None = None) -> CorrelationEstimate:
    """C(t) = ensemble mean of xi(t) xi(0).

    `paths` is either an (n, L) array or a list of RealNoisePath objects.
    """
    arr, params = _coerce_ensemble(paths, params)
    n = arr.shape[0]
    if n < 1:
        raise ValueError("empty ensemble")
    c = (arr * arr[:, :1]).mean(axis=0)
    lags = np.arange(arr.shape[1]) * params.dt
    return CorrelationEstimate(lags, c, n)


def estimate_spectrum(paths, params: NoiseParams | None = None):
    """Ensemble-averaged periodogram.

    Returns (omega, S) with omega angular frequency. Only the shape matters
    to callers (the target is proportional to 1/(omega^2 tau^2 + 1)); the
    normalization is the standard dt/n periodogram convention.
    """
    arr, params = _coerce_ensemble(paths, params)
    if arr.shape[0] < 2:
        raise ValueError("spectrum estimation needs an ensemble (>= 2 paths)")
    x = arr[:, :-1]  # drop endpoint; keeps FFT length == n_steps
    n = x.shape[1]
    ft = np.fft.rfft(x, axis=1)
    s = (np.abs(ft) ** 2).mean(axis=0) * params.dt / n
    omega = 2 * np.pi * np.fft.rfftfreq(n, params.dt)
    return omega, s


def lorentzian_halfpoint(omega: np.ndarray, s: np.ndarray) -> float:
    """Half-power frequency from a Lorentzian fit.

    Fits 1/S = a + b omega^2 (weighted by S^2, which equalizes the noise of
    1/S across the band) over the region where S exceeds 5% of its
    low-frequency plateau, and returns omega_half = sqrt(a/b), the point
    where S falls to half its omega -> 0 value.
    """
    omega = np.asarray(omega, dtype=float)
    s = np.asarray(s, dtype=float)
    if omega.shape != s.shape or omega.ndim != 1:
        raise ValueError("omega and s must be equal-length 1-d arrays")
    s0 = s[: max(2, len(s) // 64)].mean()
    band = s > 0.05 * s0
    if band.sum() < 4:
        raise ValueError("too few points above the fitting threshold")
    x = omega[band] ** 2
    y = 1.0 / s[band]
    w = s[band] ** 2
    design = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(design * w[:, None] ** 0.5, y * w**0.5, rcond=None)
    a, b = coef
    if a <= 0 or b <= 0:
        raise ValueError("Lorentzian fit failed (non-positive coefficients)")
    return float(np.sqrt(a / b))


def sum_johnson(components, seed) -> RealNoisePath:
    """Pointwise weighted sum of independent OU paths.

    `components` is a list of (NoiseParams, weight). All components must
    share dt and n_steps. Component paths are generated from child seeds
    spawned from `seed` in order.

    A 1/f-type spectrum over a band comes from an octave (or wider) ladder
    of memory times with the diffusion constants scaled as c_j proportional
    to 1/tau_j at unit weights: that gives every component equal variance,
    the standard equal-power-per-decade construction. (Scaling the weights
    as 1/tau at fixed c instead concentrates nearly all variance in the
    shortest component and flattens the sum.)
    """
    if not components:
        raise ValueError("sum_johnson needs at least one component")
    base = components[0][0]
    for p, _ in components[1:]:
        if p.n_steps != base.n_steps or p.dt != base.dt:
            raise ValueError("mismatched component lengths or steps")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(components))
    total = np.zeros(base.n_steps + 1)
    for (p, w), child in zip(components, children):
        total += w * gen_real_path(p, np.random.default_rng(child)).values
    return RealNoisePath(total, base, seed=seed)


def dump_path_csv(path, file) -> None:
    """Write a path as CSV: `t,xi` for real paths, `t,re,im` for complex."""
    vals = path.values
    ts = path.times
    own = isinstance(file, (str, bytes))
    fh = open(file, "w") if own else file
    try:
        if np.iscomplexobj(vals):
            fh.write("t,re,im\n")
            for t, v in zip(ts, vals):
                fh.write(f"{t:.17g},{v.real:.17g},{v.imag:.17g}\n")
        else:
            fh.write("t,xi\n")
            for t, v in zip(ts, vals):
                fh.write(f"{t:.17g},{v:.17g}\n")
    finally:
        if own:
            fh.close()


def _coerce_ensemble(paths, params):
    if isinstance(paths, np.ndarray):
        if params is None:
            raise ValueError("params required when passing a raw array")
        return np.asarray(paths, dtype=np.float64), params
    plist = list(paths)
    if not plist:
        raise ValueError("empty ensemble")
    p0 = plist[0].params
    arr = np.stack([p.values for p in plist])
    if params is not None:
        p0 = params
    return arr, p0
