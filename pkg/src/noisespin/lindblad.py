"""Exact reference dynamics: Lindblad integrator and two-level closed forms.

The integrator is a fixed-step classical RK4 on the density matrix. That is
deliberate: every system in this package is small and time-independent, so
adaptivity buys nothing, and a dependency-free stepper keeps the reference
side fully auditable. Hermiticity is restored by symmetrization after every
step; the trace is monitored and a drift beyond 1e-9 aborts the run
(it indicates a step-size or spec error, not something to paper over).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numkernel import as_complex_matrix, dagger, is_hermitian

TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-8


@dataclass
class LindbladSpec:
    """System Hamiltonian plus (jump operator, rate) pairs.

    Rates must be non-negative unless `allow_unphysical` is set; the flag
    exists because some mapped parameter sets (population-inverted fixed
    points) are deliberately explored.
    """

    H: np.ndarray
    jumps: list  # [(L, Gamma), ...]
    allow_unphysical: bool = False

    def __post_init__(self):
        self.H = as_complex_matrix(self.H)
        if not is_hermitian(self.H):
            raise ValueError("H must be Hermitian")
        checked = []
        for L, rate in self.jumps:
            L = as_complex_matrix(L)
            if L.shape != self.H.shape:
                raise ValueError("jump operator dimension mismatch")
            if rate < 0 and not self.allow_unphysical:
                raise ValueError(f"negative rate {rate} without allow_unphysical")
            checked.append((L, float(rate)))
        self.jumps = checked

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def max_rate_scale(self) -> float:
        h_norm = float(np.linalg.norm(self.H, 2))
        rates = [abs(r) for _, r in self.jumps]
        return max([h_norm] + rates + [1e-30])


@dataclass
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = as_complex_matrix(self.matrix)

    def validate(self, positivity: bool = True) -> "DensityMatrix":
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix not Hermitian within 1e-10")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise ValueError("density matrix trace differs from 1 beyond 1e-10")
        if positivity:
            w = np.linalg.eigvalsh(m)
            if w.min() < POSITIVITY_TOL:
                raise ValueError(f"negative eigenvalue {w.min():.3e} in density matrix")
        return self

    def expect(self, op) -> float:
        return float(np.trace(as_complex_matrix(op) @ self.matrix).real)

    def population(self, level: int) -> float:
        """Diagonal entry for a 1-based level label."""
        return float(self.matrix[level - 1, level - 1].real)


def dissipator(rho, L, Gamma: float) -> np.ndarray:
    """Gamma (L rho L+ - {L+L, rho}/2); traceless by construction."""
    rho = as_complex_matrix(rho)
    L = as_complex_matrix(L)
    if rho.shape != L.shape:
        raise ValueError("dimension mismatch between rho and L")
    LdL = dagger(L) @ L
    return Gamma * (L @ rho @ dagger(L) - 0.5 * (LdL @ rho + rho @ LdL))


def rhs(rho, spec: LindbladSpec) -> np.ndarray:
    """-i[H, rho] + sum of dissipators."""
    rho = as_complex_matrix(rho)
    out = -1j * (spec.H @ rho - rho @ spec.H)
    for L, rate in spec.jumps:
        out = out + dissipator(rho, L, rate)
    return out


def integrate(spec: LindbladSpec, rho0, t_grid, dt: float | None = None):
    """RK4 integration of the master equation, sampled at t_grid.

    dt defaults to 0.01 / max(rates, ||H||) and is shrunk to divide each
    grid gap evenly. Returns a list of DensityMatrix, one per grid point
    (the first entry is rho0 itself). Positivity is checked at recorded
    points unless the spec is flagged unphysical.
    """
    rho = as_complex_matrix(rho0).copy()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    dt_max = 0.01 / spec.max_rate_scale()
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability bound {dt_max:.3e}")

    out = [DensityMatrix(rho.copy())]
    check_pos = not spec.allow_unphysical
    out[0].validate(positivity=check_pos)
    t = t_grid[0]
    for t_next in t_grid[1:]:
        gap = t_next - t
        n_sub = max(1, int(np.ceil(gap / dt - 1e-12)))
        h = gap / n_sub
        for _ in range(n_sub):
            k1 = rhs(rho, spec)
            k2 = rhs(rho + 0.5 * h * k1, spec)
            k3 = rhs(rho + 0.5 * h * k2, spec)
            k4 = rhs(rho + h * k3, spec)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
            drift = abs(np.trace(rho).real - 1.0)
            if drift > TRACE_TOL:
                raise RuntimeError(
                    f"trace drift {drift:.2e} exceeds {TRACE_TOL}; "
                    "step size too large for this spec"
                )
        t = t_next
        dm = DensityMatrix(rho.copy())
        dm.validate(positivity=check_pos)
        out.append(dm)
    return out


def analytic_two_level(
    Gamma_e: float, Gamma_a: float, omega_s: float, rho_z0: float, rho_p0: complex, t
):
    """Closed-form traced dynamics of the damped two-level system.

    rho_z(t) = (rho_z(0) + G0/(2 Gd)) e^{-2 Gd t} - G0/(2 Gd)
    rho_+(t) = rho_+(0) e^{(i omega_s - Gd) t}

    with G0 = Gamma_e - Gamma_a and Gd = (Gamma_e + Gamma_a)/2. Works on
    scalar or array t; the steady-state branch needs Gd > 0.
    """
    t = np.asarray(t, dtype=float)
    g0 = Gamma_e - Gamma_a
    gd = 0.5 * (Gamma_e + Gamma_a)
    if gd <= 0:
        raise ValueError("Gamma_d must be positive")
    fixed = -g0 / (2.0 * gd)
    rho_z = (rho_z0 - fixed) * np.exp(-2.0 * gd * t) + fixed
    rho_p = rho_p0 * np.exp((1j * omega_s - gd) * t)
    return rho_z, rho_p


def thermal_rates(omega_s: float, beta: float, Gamma_0: float):
    """(Gamma_e, Gamma_a) from detailed balance at inverse temperature beta.

    Gamma_a = Gamma_0 N(omega_s) with the Bose-Einstein occupation
    N = 1/(e^{beta omega} - 1) and Gamma_e = Gamma_0 + Gamma_a. beta = 0 is
    rejected (the occupation, and with it both rates, diverges). For
    beta < 0 a population-inverted pair requires Gamma_0 < 0; sign
    combinations that would make either rate negative are rejected.
    """
    if beta == 0:
        raise ValueError("beta = 0: infinite-temperature rates are unbounded")
    if omega_s <= 0:
        raise ValueError("omega_s must be positive")
    n = 1.0 / np.expm1(beta * omega_s)
    gamma_a = Gamma_0 * n
    gamma_e = Gamma_0 + gamma_a
    if gamma_e < 0 or gamma_a < 0:
        raise ValueError(
            f"rates (Gamma_e={gamma_e:.4g}, Gamma_a={gamma_a:.4g}) negative; "
            "for beta < 0 use Gamma_0 < 0"
        )
    return gamma_e, gamma_a


def two_level_jumps(Gamma_e: float, Gamma_a: float):
    """Jump list for the two-level dissipator (emission then absorption)."""
    sm = np.array([[0, 0], [1, 0]], dtype=np.complex128)  # |-><+|
    sp = sm.conj().T
    return [(sm, Gamma_e), (sp, Gamma_a)]
