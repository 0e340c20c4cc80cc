"""Propagation engines: threaded JIT kernel and a pure-numpy fallback.

Both engines advance every trajectory of a chunk through the same loop:
sample-and-hold Hamiltonian over each step, with the step unitary applied as
a fixed-order Taylor expansion of exp(-i H dt) acting on the state vector.
The expansion order (default 12) is far past the point where the remainder
term underflows for the step norms this package produces (||H dt|| stays
below ~0.1), so the step is exact to machine precision; the kernel tracks
the worst norm-squared deviation as a cheap online witness of that claim.

The two engines execute the identical arithmetic in the identical order,
element for element, so their outputs agree bitwise; a test pins that down.
To keep that promise, complex products inside the step loop are written out
in explicit real arithmetic: library complex-multiply kernels are free to
contract mul/add pairs (and numpy's SIMD loops do), which shifts results by
an ulp relative to a scalar lowering of the same product.
Engine selection: the `NOISESPIN_ENGINE` environment variable (auto, numba,
numpy), overridden by an explicit engine name in the run configuration.

Coupling operators arrive in row-gather form: per noise label two arrays
(src, amp) such that (A v)[i] = amp[i] * v[src[i]], and the same for the
conjugate operator. All model structure (sector restriction, weights) is
baked into those arrays before the hot loop starts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .noisegen import NoiseParams, ou_chain

MEM_BUDGET_BYTES = 256 * 1024 * 1024
MAX_CHUNK = 64

_numba_kernel = None
_numba_error = None


def available_engines() -> list[str]:
    out = ["numpy"]
    try:
        import numba  # noqa: F401

        out.insert(0, "numba")
    except ImportError:
        pass
    return out


def resolve_engine(name: str = "auto") -> str:
    """Map an engine request (or 'auto') to a concrete engine name."""
    if name == "auto":
        name = os.environ.get("NOISESPIN_ENGINE", "auto").strip().lower() or "auto"
    if name == "auto":
        return "numba" if "numba" in available_engines() else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown engine {name!r} (use auto, numba, or numpy)")
    if name == "numba" and "numba" not in available_engines():
        raise RuntimeError("numba engine requested but numba is not importable")
    return name


def set_workers(engine: str, workers: int) -> int:
    """Apply a worker-thread request; returns the effective count.

    Only the threaded engine consumes it, and the count is clamped to the
    threads numba launched with. Results never depend on the value.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if engine != "numba":
        return 1
    import numba

    eff = min(int(workers), numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(eff)
    return eff


@dataclass
class CompiledModel:
    """Restricted-basis arrays the kernels consume."""

    dim: int
    n_labels: int
    hs: np.ndarray  # (d,) float64
    src: np.ndarray  # (L, d) int64
    amp: np.ndarray  # (L, d) float64
    srcT: np.ndarray
    ampT: np.ndarray
    psi0: np.ndarray  # (d,) complex128


def chunk_size(dim: int, n_labels: int, n_steps: int, n_rec: int) -> int:
    """Trajectories per chunk; a pure function of the problem shape.

    Chunk boundaries are part of the deterministic execution plan (never a
    function of worker count), so this must stay reproducible.
    """
    per_traj = 16 * (n_labels * 2 * (n_steps + 1)  # noise scratch
                     + n_labels * n_steps          # eta block
                     + n_rec * dim)                # recorded states
    return max(1, min(MAX_CHUNK, MEM_BUDGET_BYTES // max(per_traj, 1)))


def make_noise_block(
    master_seed, traj_indices, params_per_label: list[NoiseParams], n_steps: int
) -> np.ndarray:
    """Complex noise samples eta[b, l, k] for a chunk of trajectories.

    Each trajectory owns one generator seeded by (master_seed, index); per
    trajectory the draw order is fixed (all stationary initials, then all
    increments), making every path independent of chunking and execution
    order. Both engines call this same routine.
    """
    B = len(traj_indices)
    L = len(params_per_label)
    xi0 = np.empty((B, L, 2))
    chi = np.empty((B, L, 2, n_steps))
    for b, idx in enumerate(traj_indices):
        rng = np.random.default_rng(np.random.SeedSequence((master_seed, int(idx))))
        xi0[b] = rng.standard_normal((L, 2))
        chi[b] = rng.standard_normal((L, 2, n_steps))
    eta = np.empty((B, L, n_steps), dtype=np.complex128)
    for l, p in enumerate(params_per_label):
        scale = np.sqrt(p.stationary_var)
        xi = ou_chain(p, scale * xi0[:, l, :], chi[:, l, :, :])  # (B, 2, n+1)
        eta[:, l, :] = xi[:, 0, :n_steps] + 1j * xi[:, 1, :n_steps]
    return eta


def run_chunk(
    engine: str,
    cm: CompiledModel,
    eta: np.ndarray,
    dt: float,
    order: int,
    stride: int,
):
    """Propagate one chunk; returns (states, norm2_dev).

    states: (B, n_rec, d) snapshots at steps 0, stride, ..., K (K divisible
    by stride). norm2_dev: per-trajectory max | ||psi||^2 - 1 | over all steps.
    """
    B, L, K = eta.shape
    if K % stride != 0:
        raise ValueError("step count must be a multiple of the record stride")
    n_rec = K // stride + 1
    if engine == "numba":
        kern = _get_numba_kernel()
        states = np.empty((B, n_rec, cm.dim), dtype=np.complex128)
        dev = np.empty(B)
        kern(
            cm.psi0, cm.hs, cm.src, cm.amp, cm.srcT, cm.ampT,
            eta, float(dt), int(order), int(stride), states, dev,
        )
        return states, dev
    if engine == "numpy":
        return _run_chunk_numpy(cm, eta, float(dt), int(order), int(stride), n_rec)
    raise ValueError(f"unknown engine {engine!r}")


def _run_chunk_numpy(cm, eta, dt, order, stride, n_rec):
    B, L, K = eta.shape
    d = cm.dim
    states = np.empty((B, n_rec, d), dtype=np.complex128)
    dev = np.zeros(B)
    psi = np.broadcast_to(cm.psi0, (B, d)).copy()
    hs = cm.hs
    r = 0
    for k in range(K):
        if k % stride == 0:
            states[:, r, :] = psi
            r += 1
        acc = psi.copy()
        term = psi.copy()
        for n in range(1, order + 1):
            new = hs[np.newaxis, :] * term
            nr, ni = new.real, new.imag
            for l in range(L):
                e = eta[:, l, k]
                p = e[:, np.newaxis] * cm.amp[l][np.newaxis, :]
                tg = term[:, cm.src[l]]
                nr += p.real * tg.real - p.imag * tg.imag
                ni += p.real * tg.imag + p.imag * tg.real
                p = np.conj(e)[:, np.newaxis] * cm.ampT[l][np.newaxis, :]
                tg = term[:, cm.srcT[l]]
                nr += p.real * tg.real - p.imag * tg.imag
                ni += p.real * tg.imag + p.imag * tg.real
            # multiply by -i dt/n, spelled out so both engines round alike
            s = dt / n
            term = np.empty_like(new)
            term.real = s * ni
            term.imag = -(s * nr)
            acc = acc + term
        psi = acc
        # diagnostic only; excluded from the bitwise output contract
        dev = np.maximum(dev, np.abs((np.abs(psi) ** 2).sum(axis=1) - 1.0))
    states[:, n_rec - 1, :] = psi
    return states, dev


def _get_numba_kernel():
    global _numba_kernel, _numba_error
    if _numba_kernel is not None:
        return _numba_kernel
    if _numba_error is not None:
        raise _numba_error
    try:
        import numba
    except ImportError as exc:  # pragma: no cover - depends on environment
        _numba_error = RuntimeError("numba engine requested but numba is missing")
        raise _numba_error from exc

    @numba.njit(parallel=True, cache=True)
    def kernel(psi0, hs, src, amp, srcT, ampT, eta, dt, order, stride, states, dev):
        B, L, K = eta.shape
        d = psi0.shape[0]
        for b in numba.prange(B):
            psi = psi0.copy()
            worst = 0.0
            r = 0
            for k in range(K):
                if k % stride == 0:
                    for i in range(d):
                        states[b, r, i] = psi[i]
                    r += 1
                acc = psi.copy()
                term = psi.copy()
                for n in range(1, order + 1):
                    new = np.empty(d, dtype=np.complex128)
                    for i in range(d):
                        t = term[i]
                        new[i] = complex(hs[i] * t.real, hs[i] * t.imag)
                    for l in range(L):
                        e = eta[b, l, k]
                        er = e.real
                        ei = e.imag
                        for i in range(d):
                            a = amp[l, i]
                            pr = er * a
                            pi = ei * a
                            t = term[src[l, i]]
                            new[i] += complex(
                                pr * t.real - pi * t.imag, pr * t.imag + pi * t.real
                            )
                        nei = -ei
                        for i in range(d):
                            a = ampT[l, i]
                            pr = er * a
                            pi = nei * a
                            t = term[srcT[l, i]]
                            new[i] += complex(
                                pr * t.real - pi * t.imag, pr * t.imag + pi * t.real
                            )
                    s = dt / n
                    for i in range(d):
                        t = complex(s * new[i].imag, -(s * new[i].real))
                        term[i] = t
                        acc[i] += t
                psi = acc
                nrm2 = 0.0
                for i in range(d):
                    nrm2 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                if abs(nrm2 - 1.0) > worst:
                    worst = abs(nrm2 - 1.0)
            for i in range(d):
                states[b, r, i] = psi[i]
            dev[b] = worst

    _numba_kernel = kernel
    return kernel
