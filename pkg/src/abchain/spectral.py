"""Dense complex eigensolver and skin-effect localization diagnostics.

The eigensolver reduces the matrix to upper Hessenberg form with Householder
reflections, then runs single-shift complex QR sweeps (Wilkinson shift,
Givens rotations, deflation on negligible subdiagonals) to a Schur form
``A = Q T Q^H``.  Eigenvectors come from back-substitution on ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .model import BasisLayout, LatticeOperator

__all__ = [
    "EigenPair",
    "EigenSolverError",
    "LocalizationProfile",
    "hessenberg",
    "schur",
    "eigendecompose",
    "localization_profile",
    "spectrum_profiles",
]

ITERATIONS_PER_EIGENVALUE = 30
RESIDUAL_RTOL = 1e-8
_EPS = np.finfo(float).eps


class EigenSolverError(RuntimeError):
    """QR iteration failed to converge or an eigenpair missed the residual bound."""

    def __init__(self, message: str, worst_residual: float):
        super().__init__(message)
        self.worst_residual = worst_residual


@dataclass(frozen=True, eq=False)
class EigenPair:
    eigenvalue: complex
    right_vector: np.ndarray


@dataclass(frozen=True, eq=False)
class LocalizationProfile:
    per_cell_weight: np.ndarray
    mean_cell: float


@njit(cache=True)
def _hessenberg(a, q):
    n = a.shape[0]
    for k in range(n - 2):
        norm = 0.0
        for i in range(k + 1, n):
            norm += a[i, k].real ** 2 + a[i, k].imag ** 2
        norm = np.sqrt(norm)
        if norm == 0.0:
            continue
        x0 = a[k + 1, k]
        phase = x0 / abs(x0) if abs(x0) > 0 else 1.0 + 0j
        alpha = -phase * norm
        v = np.empty(n - k - 1, dtype=np.complex128)
        for i in range(k + 1, n):
            v[i - k - 1] = a[i, k]
        v[0] -= alpha
        vn = 0.0
        for i in range(v.shape[0]):
            vn += v[i].real ** 2 + v[i].imag ** 2
        vn = np.sqrt(vn)
        if vn == 0.0:
            continue
        v /= vn
        # rows: A[k+1:, :] -= 2 v (v^H A[k+1:, :])
        for j in range(n):
            s = 0j
            for i in range(v.shape[0]):
                s += np.conj(v[i]) * a[k + 1 + i, j]
            for i in range(v.shape[0]):
                a[k + 1 + i, j] -= 2.0 * v[i] * s
        # columns: A[:, k+1:] -= 2 (A[:, k+1:] v) v^H, same for Q
        for i in range(n):
            s = 0j
            t = 0j
            for j in range(v.shape[0]):
                s += a[i, k + 1 + j] * v[j]
                t += q[i, k + 1 + j] * v[j]
            for j in range(v.shape[0]):
                a[i, k + 1 + j] -= 2.0 * s * np.conj(v[j])
                q[i, k + 1 + j] -= 2.0 * t * np.conj(v[j])
        a[k + 1, k] = alpha
        for i in range(k + 2, n):
            a[i, k] = 0j


@njit(cache=True)
def _wilkinson(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = np.sqrt(tr * tr - det)
    l1 = tr + disc
    l2 = tr - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


@njit(cache=True)
def _qr_schur(h, q, max_iter):
    """Reduce Hessenberg ``h`` to upper triangular in place; returns iterations used or -1."""
    n = h.shape[0]
    hi = n - 1
    total = 0
    since_deflation = 0
    cs = np.empty(n, dtype=np.float64)
    sn = np.empty(n, dtype=np.complex128)
    while hi > 0:
        # locate the active window [lo, hi]
        lo = hi
        while lo > 0:
            scale = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if scale == 0.0:
                scale = 1.0
            if abs(h[lo, lo - 1]) <= _EPS * scale:
                h[lo, lo - 1] = 0j
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            since_deflation = 0
            continue
        if total >= max_iter:
            return -1
        total += 1
        since_deflation += 1
        if since_deflation % 11 == 0:
            # exceptional shift to break cycles
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
        else:
            mu = _wilkinson(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        for k in range(lo, hi + 1):
            h[k, k] -= mu
        # H - mu I = G R, rotations applied from the left
        for k in range(lo, hi):
            x = h[k, k]
            y = h[k + 1, k]
            r = np.sqrt(abs(x) ** 2 + abs(y) ** 2)
            if r == 0.0:
                c = 1.0
                s = 0j
            else:
                c = abs(x) / r
                if abs(x) == 0.0:
                    c = 0.0
                    s = np.conj(y) / abs(y)
                else:
                    s = (x / abs(x)) * np.conj(y) / r
            cs[k] = c
            sn[k] = s
            for j in range(k, n):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = c * t1 + s * t2
                h[k + 1, j] = -np.conj(s) * t1 + c * t2
            h[k + 1, k] = 0j
        # R G from the right, and accumulate into Q
        for k in range(lo, hi):
            c = cs[k]
            s = sn[k]
            top = min(k + 2, hi + 1)
            for i in range(top):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = c * t1 + np.conj(s) * t2
                h[i, k + 1] = -s * t1 + c * t2
            for i in range(n):
                t1 = q[i, k]
                t2 = q[i, k + 1]
                q[i, k] = c * t1 + np.conj(s) * t2
                q[i, k + 1] = -s * t1 + c * t2
        for k in range(lo, hi + 1):
            h[k, k] += mu
    return total


def hessenberg(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H, Q)`` with ``a = Q H Q^H`` and ``H`` upper Hessenberg."""
    h = np.array(a, dtype=np.complex128, order="C")
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    q = np.eye(h.shape[0], dtype=np.complex128)
    _hessenberg(h, q)
    return h, q


def schur(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form ``a = Q T Q^H`` by Hessenberg reduction and shifted QR."""
    h, q = hessenberg(a)
    n = h.shape[0]
    used = _qr_schur(h, q, ITERATIONS_PER_EIGENVALUE * max(n, 1))
    if used < 0:
        sub = np.abs(np.diag(h, -1))
        raise EigenSolverError(
            f"QR iteration did not converge within {ITERATIONS_PER_EIGENVALUE * n} sweeps",
            float(sub.max(initial=0.0)),
        )
    return np.triu(h), q


def _triangular_eigenvectors(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    small = max(_EPS * np.max(np.abs(t), initial=0.0), np.finfo(float).tiny)
    y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        y[k, k] = 1.0
        if k == 0:
            continue
        m = t[:k, :k] - t[k, k] * np.eye(k)
        d = np.diag(m).copy()
        tiny = np.abs(d) < small
        d[tiny] = small
        m[np.diag_indices(k)] = d
        y[:k, k] = scipy.linalg.solve_triangular(m, -t[:k, k], lower=False)
    return y


def eigendecompose(op: LatticeOperator | np.ndarray) -> list[EigenPair]:
    """All eigenpairs of a dense complex matrix.

    Eigenvalues are sorted by real part, ties by imaginary part.  Vectors have
    unit norm with their largest component real and positive.  Raises
    :class:`EigenSolverError` if any pair has residual above
    ``1e-8 * ||A||`` (max row sum).
    """
    a = np.asarray(op.entries if isinstance(op, LatticeOperator) else op, dtype=complex)
    n = a.shape[0]
    if n > 2000:
        raise ValueError(f"eigendecompose supports dim <= 2000, got {n}")
    if n == 0:
        return []
    t, q = schur(a)
    vecs = q @ _triangular_eigenvectors(t)
    lam = np.diag(t).copy()
    vecs /= np.linalg.norm(vecs, axis=0)
    pivot = np.argmax(np.abs(vecs), axis=0)
    phase = vecs[pivot, np.arange(n)]
    vecs *= (np.abs(phase) / phase)[None, :]

    anorm = float(np.max(np.sum(np.abs(a), axis=1)))
    resid = np.linalg.norm(a @ vecs - vecs * lam[None, :], axis=0)
    worst = float(resid.max())
    if worst > RESIDUAL_RTOL * max(anorm, np.finfo(float).tiny):
        raise EigenSolverError(
            f"eigenpair residual {worst:.3e} exceeds {RESIDUAL_RTOL:g} * ||A|| = {RESIDUAL_RTOL * anorm:.3e}",
            worst,
        )
    scale = max(anorm, 1.0)
    order = np.lexsort((lam.imag, np.round(lam.real / scale, 9)))
    return [EigenPair(complex(lam[i]), vecs[:, i].copy()) for i in order]


def localization_profile(state: np.ndarray, layout: BasisLayout) -> LocalizationProfile:
    """Per-cell probability of ``state`` and its centre of mass in cells."""
    v = np.asarray(state, dtype=complex).reshape(-1)
    if v.size != layout.dim:
        raise ValueError(f"state length {v.size} does not match layout dim {layout.dim}")
    total = float(np.vdot(v, v).real)
    if total == 0.0:
        raise ValueError("localization profile of the zero vector is undefined")
    w = (np.abs(v) ** 2).reshape(layout.n_cells, layout.n_sub).sum(axis=1) / total
    return LocalizationProfile(w, float(np.arange(layout.n_cells) @ w))


def spectrum_profiles(h: LatticeOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and the ``(dim, n_cells)`` matrix of eigenstate cell weights."""
    pairs = eigendecompose(h)
    lam = np.array([p.eigenvalue for p in pairs])
    weights = np.array([localization_profile(p.right_vector, h.layout).per_cell_weight for p in pairs])
    return lam, weights
