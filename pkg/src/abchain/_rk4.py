"""Compiled fixed-step RK4 for ``dy/dt = A y`` with ``A`` in CSR form."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _matvec(indptr, indices, data, x, out):
    n = out.shape[0]
    for i in range(n):
        acc = 0j
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


@njit(cache=True)
def rk4_advance(indptr, indices, data, y, h, nsteps, perm):
    """Take ``nsteps`` RK4 steps of size ``h`` in place.

    When ``perm`` is non-empty ``y`` is a vectorized Hermitian matrix and
    ``perm`` maps each entry to its transpose; the state is symmetrized
    after every step.
    """
    n = y.shape[0]
    k = np.empty(n, dtype=np.complex128)
    acc = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    half = 0.5 * h
    sixth = h / 6.0
    sym = perm.shape[0] > 0
    for _ in range(nsteps):
        _matvec(indptr, indices, data, y, k)
        for i in range(n):
            acc[i] = k[i]
            tmp[i] = y[i] + half * k[i]
        _matvec(indptr, indices, data, tmp, k)
        for i in range(n):
            acc[i] += 2.0 * k[i]
            tmp[i] = y[i] + half * k[i]
        _matvec(indptr, indices, data, tmp, k)
        for i in range(n):
            acc[i] += 2.0 * k[i]
            tmp[i] = y[i] + h * k[i]
        _matvec(indptr, indices, data, tmp, k)
        for i in range(n):
            y[i] += sixth * (acc[i] + k[i])
        if sym:
            for i in range(n):
                tmp[i] = 0.5 * (y[i] + np.conj(y[perm[i]]))
            for i in range(n):
                y[i] = tmp[i]
