"""Minimal dense complex linear algebra for operator construction and stepping.

Matrices and state vectors are plain ``numpy.ndarray`` objects with
``complex128`` entries; this module only adds the handful of operations the
rest of the package needs (Kronecker composition, commutators, Hermitian
matrix exponentials) together with the shape/Hermiticity guards the callers
rely on. Everything here is a pure function; nothing mutates its inputs.
"""

from __future__ import annotations

import numpy as np

HERM_TOL = 1e-10


def as_complex_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {m.shape}")
    return m


def as_state_vector(v) -> np.ndarray:
    w = np.asarray(v, dtype=np.complex128)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-d array, got shape {w.shape}")
    return w


def is_hermitian(a, tol: float = HERM_TOL) -> bool:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def kron(a, b) -> np.ndarray:
    """Kronecker product a (x) b; dimensions multiply."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


def kron_all(*mats) -> np.ndarray:
    """Left-to-right Kronecker product of any number of matrices."""
    if not mats:
        raise ValueError("kron_all needs at least one matrix")
    out = as_complex_matrix(mats[0])
    for m in mats[1:]:
        out = np.kron(out, as_complex_matrix(m))
    return out


def commutator(a, b) -> np.ndarray:
    """[A, B] = AB - BA for square matrices of equal dimension."""
    ma, mb = as_complex_matrix(a), as_complex_matrix(b)
    if ma.shape[0] != ma.shape[1] or mb.shape[0] != mb.shape[1]:
        raise ValueError("commutator requires square matrices")
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    return ma @ mb - mb @ ma


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_complex_matrix(a).conj().T


def expm_unitary(h, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian h, via eigendecomposition.

    Parameters
    ----------
    h : array_like
        Hermitian matrix (checked to within 1e-10 max elementwise).
    dt : float
        Time step; dt = 0 returns the identity exactly.

    Returns
    -------
    numpy.ndarray
        Unitary U with U U+ = 1 to machine accuracy.
    """
    m = as_complex_matrix(h)
    if m.shape[0] != m.shape[1]:
        raise ValueError("expm_unitary requires a square matrix")
    if not is_hermitian(m):
        raise ValueError("expm_unitary requires a Hermitian matrix")
    if dt == 0.0:
        return np.eye(m.shape[0], dtype=np.complex128)
    # eigh is exact for Hermitian input; dims here stay small (<= a few hundred)
    w, v = np.linalg.eigh(m)
    phase = np.exp(-1j * dt * w)
    return (v * phase) @ v.conj().T


def apply(m, v) -> np.ndarray:
    """Matrix-vector product with a dimension guard."""
    mm = as_complex_matrix(m)
    vv = as_state_vector(v)
    if mm.shape[1] != vv.shape[0]:
        raise ValueError(f"dimension mismatch: {mm.shape} @ {vv.shape}")
    return mm @ vv
