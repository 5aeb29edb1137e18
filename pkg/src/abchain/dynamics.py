"""Time evolution under the three dynamical models.

* :func:`evolve_schrodinger` -- ``d psi/dt = -i H psi`` with the non-Hermitian
  effective Hamiltonian, no renormalization.
* :func:`evolve_hybrid` -- ``d rho/dt = -i(H rho - rho H^dag) + D[rho]`` with
  the heating dissipator.
* :func:`evolve_lindblad` -- trace-preserving Lindblad evolution over the
  extended layout.

All three run a fixed-step RK4 on a sparse generator.  The step starts at
``dt = 0.05 / ||H||`` and is halved until two successive runs agree on every
recorded observable to ``tol``.  Exponential propagators
(:func:`propagate_expm`, :func:`propagate_superoperator_expm`) give an
independent reference for time-independent generators.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from ._rk4 import rk4_advance
from .model import (
    BasisLayout,
    JumpFamily,
    LatticeOperator,
    Sublattices,
    build_coherent_hamiltonian,
    build_effective_hamiltonian,
    build_jump_operators,
)
from .params import ChainParams
from .states import (
    DensityState,
    InitialStateSpec,
    PureState,
    TruncationWarning,
    as_density,
    density_entropy,
    make_initial_state,
)

__all__ = [
    "IntegrationError",
    "PositivityError",
    "Trajectory",
    "default_grid",
    "evolve_schrodinger",
    "evolve_hybrid",
    "evolve_lindblad",
    "lindblad_superoperator",
    "propagate_expm",
    "propagate_superoperator_expm",
    "Model",
    "run_model",
    "TOP_CELL_LIMIT",
]

TOP_CELL_LIMIT = 1e-3
STEP_SAFETY = 0.05
MAX_HALVINGS = 8
POSITIVITY_LIMIT = -1e-6


class IntegrationError(RuntimeError):
    """Step halving did not reach the requested tolerance."""

    def __init__(self, message: str, worst: float):
        super().__init__(message)
        self.worst = worst


class PositivityError(RuntimeError):
    """A propagated density matrix developed a significantly negative eigenvalue."""

    def __init__(self, message: str, time: float, eigenvalue: float):
        super().__init__(message)
        self.time = time
        self.eigenvalue = eigenvalue


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observables recorded on a time grid (ms).

    ``site_populations`` are normalized per the model's post-selection rule;
    ``weight`` is the normalization that was divided out (norm squared, trace,
    or the trace of the (a, b, c, e) block) and ``trace`` the total norm
    squared or trace.
    """

    times: np.ndarray
    site_populations: np.ndarray
    weight: np.ndarray
    trace: np.ndarray
    entropy: np.ndarray
    layout: BasisLayout
    model: str = "custom"
    dt: float = float("nan")
    halvings: int = 0
    states: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be a strictly increasing 1-d grid")
        n = t.size
        for name in ("site_populations", "weight", "trace", "entropy"):
            if np.asarray(getattr(self, name)).shape[0] != n:
                raise ValueError(f"{name} has {np.asarray(getattr(self, name)).shape[0]} records, expected {n}")

    def __len__(self) -> int:
        return self.times.size

    @property
    def n_cells(self) -> int:
        return self.layout.n_cells

    @property
    def cell_populations(self) -> np.ndarray:
        """``(len(times), n_cells)`` populations summed over sublattices."""
        p = np.asarray(self.site_populations)
        return p.reshape(p.shape[0], self.layout.n_cells, self.layout.n_sub).sum(axis=2)

    def sublattice_population(self, sublattice: str) -> np.ndarray:
        p = np.asarray(self.site_populations)
        return p[:, self.layout.indices(sublattice)].sum(axis=1)

    @property
    def mean_phonon(self) -> np.ndarray:
        return self.cell_populations @ np.arange(self.n_cells)

    @property
    def variance(self) -> np.ndarray:
        n = np.arange(self.n_cells)
        return np.maximum(self.cell_populations @ (n * n) - self.mean_phonon**2, 0.0)

    @property
    def fluctuation(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def top_cell_max(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(self.cell_populations[:, -1]))


def default_grid(t_final: float = 1.0, points: int = 501) -> np.ndarray:
    return np.linspace(0.0, t_final, points)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _dense(op: LatticeOperator | np.ndarray) -> np.ndarray:
    return np.asarray(op.entries if isinstance(op, LatticeOperator) else op, dtype=complex)


def _max_row_sum(m: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(m), axis=1), initial=0.0))


def lindblad_superoperator(
    h: LatticeOperator | np.ndarray, jumps: Sequence[LatticeOperator | np.ndarray]
) -> sp.csr_matrix:
    """Sparse generator acting on row-major ``vec(rho)``.

    ``-i(H rho - rho H^dag) + sum_L (L rho L^dag - {L^dag L, rho}/2)``.  ``H``
    may be non-Hermitian, which yields the hybrid equation.
    """
    hm = _dense(h)
    d = hm.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    k = np.zeros((d, d), dtype=complex)
    jump_terms = []
    for op in jumps:
        lm = _dense(op)
        if not np.any(lm):
            continue
        k += lm.conj().T @ lm
        ls = sp.csr_matrix(lm)
        jump_terms.append(sp.kron(ls, ls.conj(), format="csr"))
    heff = sp.csr_matrix(hm - 0.5j * k)
    gen = -1j * (sp.kron(heff, eye, format="csr") - sp.kron(eye, heff.conj(), format="csr"))
    for term in jump_terms:
        gen = gen + term
    gen = sp.csr_matrix(gen)
    gen.eliminate_zeros()
    return gen


def _reachable(gen: sp.csr_matrix, support: np.ndarray) -> np.ndarray:
    """Indices that can become nonzero starting from ``support``."""
    pattern = sp.csr_matrix((np.ones(gen.nnz), gen.indices, gen.indptr), shape=gen.shape)
    mask = support.copy()
    while True:
        grown = mask | (pattern @ mask.astype(float) > 0)
        if np.array_equal(grown, mask):
            return np.flatnonzero(mask)
        mask = grown


# ---------------------------------------------------------------------------
# core integrator
# ---------------------------------------------------------------------------


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if not np.all(np.isfinite(t)):
        raise ValueError("time grid must be finite")
    return t


def _run_rk4(gen: sp.csr_matrix, y0: np.ndarray, t: np.ndarray, dt: float, perm: np.ndarray) -> np.ndarray:
    indptr = gen.indptr.astype(np.int64)
    indices = gen.indices.astype(np.int64)
    data = gen.data.astype(np.complex128)
    y = y0.astype(np.complex128).copy()
    out = np.empty((t.size, y.size), dtype=complex)
    out[0] = y
    for i in range(1, t.size):
        span = t[i] - t[i - 1]
        nsteps = max(1, math.ceil(span / dt - 1e-9))
        rk4_advance(indptr, indices, data, y, span / nsteps, nsteps, perm)
        out[i] = y
    return out


def _integrate(
    gen: sp.csr_matrix,
    y0: np.ndarray,
    t: np.ndarray,
    dt0: float,
    tol: float,
    observe: Callable[[np.ndarray], np.ndarray],
    perm: np.ndarray,
) -> tuple[np.ndarray, float, int]:
    if t.size == 1:
        return y0[None, :].astype(complex), dt0, 0
    prev = None
    dt = dt0
    worst = math.inf
    for level in range(MAX_HALVINGS + 1):
        ys = _run_rk4(gen, y0, t, dt, perm)
        obs = observe(ys)
        if prev is not None:
            worst = float(np.max(np.abs(obs - prev)))
            if worst < tol:
                return ys, dt, level
        prev = obs
        dt /= 2
    raise IntegrationError(
        f"step halving reached {MAX_HALVINGS} levels without meeting tol={tol:g} "
        f"(last change {worst:.3e})",
        worst,
    )


def _guard_truncation(traj: Trajectory) -> None:
    top = traj.top_cell_max
    if top >= TOP_CELL_LIMIT:
        warnings.warn(
            f"{traj.model}: top cell n={traj.n_cells - 1} reached population {top:.3e} "
            f"(limit {TOP_CELL_LIMIT:g}); increase n_cells",
            TruncationWarning,
            stacklevel=3,
        )


def _step_bound(h: np.ndarray, jumps: Sequence[np.ndarray] = ()) -> float:
    bound = STEP_SAFETY / max(_max_row_sum(h), 1e-300)
    if jumps:
        k = sum(j.conj().T @ j for j in jumps)
        rate = _max_row_sum(k)
        if rate > 0:
            bound = min(bound, 1.0 / rate)
    return bound


# ---------------------------------------------------------------------------
# pure states
# ---------------------------------------------------------------------------


def evolve_schrodinger(
    h: LatticeOperator,
    psi0: PureState,
    t_grid: Sequence[float],
    tol: float = 1e-6,
    store_states: bool = False,
) -> Trajectory:
    """Integrate ``d psi/dt = -i H psi`` without renormalizing.

    Recorded populations are normalized by the surviving norm squared, which
    is itself kept in ``weight``.
    """
    t = _check_grid(t_grid)
    hm = _dense(h)
    if psi0.layout != h.layout:
        raise ValueError("initial state and Hamiltonian use different layouts")
    gen = sp.csr_matrix(-1j * hm)
    gen.eliminate_zeros()

    def observe(ys: np.ndarray) -> np.ndarray:
        pops = np.abs(ys) ** 2
        w = pops.sum(axis=1, keepdims=True)
        return np.hstack([pops / np.where(w > 0, w, 1.0), w])

    ys, dt, level = _integrate(gen, psi0.amplitudes, t, _step_bound(hm), tol, observe, np.empty(0, np.int64))
    return _pure_trajectory(t, ys, h.layout, "schrodinger", dt, level, store_states)


def _pure_trajectory(t, ys, layout, model, dt, level, store) -> Trajectory:
    pops = np.abs(ys) ** 2
    norm2 = pops.sum(axis=1)
    traj = Trajectory(
        times=t,
        site_populations=pops / np.where(norm2 > 0, norm2, 1.0)[:, None],
        weight=norm2,
        trace=norm2,
        entropy=np.zeros(t.size),
        layout=layout,
        model=model,
        dt=dt,
        halvings=level,
        states=ys if store else None,
    )
    _guard_truncation(traj)
    return traj


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------


def _density_trajectory(
    t: np.ndarray,
    rhos: np.ndarray,
    layout: BasisLayout,
    model: str,
    dt: float,
    level: int,
    store: bool,
) -> Trajectory:
    mask = layout.conditional_mask()
    diag = np.real(np.diagonal(rhos, axis1=1, axis2=2))
    kept = np.where(mask, diag, 0.0)
    weight = kept.sum(axis=1)
    trace = diag.sum(axis=1)
    pops = kept / np.where(weight > 0, weight, 1.0)[:, None]
    entropy = np.empty(t.size)
    idx = np.flatnonzero(mask)
    for i in range(t.size):
        block = rhos[i][np.ix_(idx, idx)]
        w = weight[i]
        if w <= 0:
            raise PositivityError(f"{model}: conditional weight vanished at t={t[i]:g} ms", float(t[i]), 0.0)
        ev = np.linalg.eigvalsh(0.5 * (block + block.conj().T) / w)
        if ev[0] < POSITIVITY_LIMIT:
            raise PositivityError(
                f"{model}: density matrix eigenvalue {ev[0]:.3e} at t={t[i]:g} ms "
                f"is below {POSITIVITY_LIMIT:g}",
                float(t[i]),
                float(ev[0]),
            )
        entropy[i] = density_entropy(ev, eigenvalues=True)
    traj = Trajectory(
        times=t,
        site_populations=pops,
        weight=weight,
        trace=trace,
        entropy=entropy,
        layout=layout,
        model=model,
        dt=dt,
        halvings=level,
        states=rhos if store else None,
    )
    _guard_truncation(traj)
    return traj


def _evolve_density(
    h: LatticeOperator,
    jumps: Sequence[LatticeOperator],
    rho0: DensityState,
    t: np.ndarray,
    tol: float,
    model: str,
    store_states: bool,
) -> Trajectory:
    layout = h.layout
    d = layout.dim
    if rho0.layout != layout:
        raise ValueError("initial state and Hamiltonian use different layouts")
    for op in jumps:
        if op.layout != layout:
            raise ValueError("jump operator layout differs from the Hamiltonian layout")
    hm = _dense(h)
    jm = [_dense(j) for j in jumps]
    gen = lindblad_superoperator(hm, jm)

    y0_full = rho0.matrix.reshape(-1)
    support = y0_full != 0
    support |= support.reshape(d, d).T.reshape(-1)
    keep = _reachable(gen, support)
    # reachable set is closed under transposition for Hermiticity-preserving generators
    rows, cols = np.divmod(keep, d)
    lookup = np.full(d * d, -1, dtype=np.int64)
    lookup[keep] = np.arange(keep.size)
    perm = lookup[cols * d + rows]
    if np.any(perm < 0):
        raise RuntimeError("reachable support is not closed under transposition")
    sub = sp.csr_matrix(gen[keep][:, keep])

    mask = layout.conditional_mask()
    diag_pos = lookup[np.arange(d) * (d + 1)]
    present = diag_pos >= 0
    kept_pos = diag_pos[present & mask]
    all_pos = diag_pos[present]

    def observe(ys: np.ndarray) -> np.ndarray:
        kept = np.real(ys[:, kept_pos])
        w = kept.sum(axis=1, keepdims=True)
        tr = np.real(ys[:, all_pos]).sum(axis=1, keepdims=True)
        return np.hstack([kept / np.where(w > 0, w, 1.0), w, tr])

    ys, dt, level = _integrate(sub, y0_full[keep], t, _step_bound(hm, jm), tol, observe, perm)
    rhos = np.zeros((t.size, d * d), dtype=complex)
    rhos[:, keep] = ys
    return _density_trajectory(t, rhos.reshape(t.size, d, d), layout, model, dt, level, store_states)


def evolve_hybrid(
    h: LatticeOperator,
    jumps: Sequence[LatticeOperator],
    rho0: DensityState | PureState,
    t_grid: Sequence[float],
    tol: float = 1e-6,
    store_states: bool = False,
) -> Trajectory:
    """Hybrid master equation: non-Hermitian drift plus heating dissipators.

    Observables are normalized by the decaying trace.
    """
    if h.layout.sublattices is not Sublattices.REDUCED:
        raise ValueError("hybrid evolution runs over the reduced (a, b, c) layout")
    return _evolve_density(h, jumps, as_density(rho0), _check_grid(t_grid), tol, "hybrid", store_states)


def evolve_lindblad(
    h_coh: LatticeOperator,
    jumps: Sequence[LatticeOperator],
    rho0: DensityState | PureState,
    t_grid: Sequence[float],
    tol: float = 1e-6,
    store_states: bool = False,
) -> Trajectory:
    """Full Lindblad evolution over the extended layout.

    Populations are conditioned on the (a, b, c, e) subspace, i.e. on no
    decay into the reservoir states.
    """
    if h_coh.layout.sublattices is not Sublattices.EXTENDED:
        raise ValueError("Lindblad evolution runs over the extended (a, b, c, e, r1, r2) layout")
    if not h_coh.is_hermitian(atol=1e-12 * max(h_coh.norm(), 1.0)):
        raise ValueError("Lindblad evolution needs a Hermitian coherent Hamiltonian")
    return _evolve_density(h_coh, jumps, as_density(rho0), _check_grid(t_grid), tol, "lindblad", store_states)


# ---------------------------------------------------------------------------
# exponential reference propagators
# ---------------------------------------------------------------------------


def _interval_propagators(gen: np.ndarray, t: np.ndarray, method: str) -> Callable[[float], np.ndarray]:
    cache: dict[float, np.ndarray] = {}
    if method == "spectral":
        lam, vec = np.linalg.eig(gen)
        inv = np.linalg.inv(vec)

        def make(span: float) -> np.ndarray:
            return (vec * np.exp(lam * span)) @ inv
    elif method == "pade":
        def make(span: float) -> np.ndarray:
            return scipy.linalg.expm(gen * span)
    else:
        raise ValueError(f"unknown method {method!r}")

    def get(span: float) -> np.ndarray:
        key = round(span, 15)
        if key not in cache:
            cache[key] = make(span)
        return cache[key]

    return get


def propagate_expm(
    h: LatticeOperator,
    psi0: PureState,
    t_grid: Sequence[float],
    method: str = "pade",
    store_states: bool = False,
) -> Trajectory:
    """Reference propagation ``psi(t) = exp(-i H t) psi0`` interval by interval.

    ``method="spectral"`` uses an eigendecomposition of ``H``; the default
    scaling-and-squaring Pade route stays accurate for the strongly
    non-normal skin-effect Hamiltonians.
    """
    t = _check_grid(t_grid)
    prop = _interval_propagators(-1j * _dense(h), t, method)
    ys = np.empty((t.size, h.dim), dtype=complex)
    ys[0] = psi0.amplitudes
    for i in range(1, t.size):
        ys[i] = prop(t[i] - t[i - 1]) @ ys[i - 1]
    return _pure_trajectory(t, ys, h.layout, f"expm-{method}", float("nan"), 0, store_states)


def propagate_superoperator_expm(
    h: LatticeOperator,
    jumps: Sequence[LatticeOperator],
    rho0: DensityState | PureState,
    t_grid: Sequence[float],
    store_states: bool = False,
    max_dim: int = 64,
    method: str = "pade",
) -> Trajectory:
    """Reference density propagation with the exponential of the superoperator.

    ``method="pade"`` forms the dense propagator of every distinct interval;
    ``method="action"`` applies the exponential of the sparse generator to
    the state directly (truncated Taylor series with norm-based scaling).
    """
    t = _check_grid(t_grid)
    rho0 = as_density(rho0)
    d = h.dim
    if d > max_dim:
        raise ValueError(f"superoperator exponential limited to dim <= {max_dim}, got {d}")
    ys = np.empty((t.size, d * d), dtype=complex)
    ys[0] = rho0.matrix.reshape(-1)
    if method == "action":
        gen = lindblad_superoperator(h, jumps).tocsc()
        for i in range(1, t.size):
            ys[i] = scipy.sparse.linalg.expm_multiply(gen * (t[i] - t[i - 1]), ys[i - 1])
    else:
        prop = _interval_propagators(lindblad_superoperator(h, jumps).toarray(), t, method)
        for i in range(1, t.size):
            ys[i] = prop(t[i] - t[i - 1]) @ ys[i - 1]
    model = "superop-expm"
    return _density_trajectory(t, ys.reshape(t.size, d, d), h.layout, model, float("nan"), 0, store_states)


# ---------------------------------------------------------------------------
# model dispatch
# ---------------------------------------------------------------------------


class Model(enum.Enum):
    EFFECTIVE = "effective"
    HYBRID = "hybrid"
    LINDBLAD = "lindblad"


ALL_JUMPS = (JumpFamily.HEATING, JumpFamily.DECAY_TO_C, JumpFamily.DECAY_TO_RESERVOIR)


def run_model(
    params: ChainParams,
    model: Model | str,
    initial: InitialStateSpec,
    t_grid: Sequence[float],
    tol: float = 1e-6,
    jumps: Sequence[JumpFamily | str] | None = None,
    store_states: bool = False,
) -> Trajectory:
    """Build the operators for ``model`` from ``params`` and propagate ``initial``.

    ``jumps`` defaults to heating for the hybrid model and to every family
    for the Lindblad model.
    """
    model = Model(model)
    if model is Model.LINDBLAD:
        h = build_coherent_hamiltonian(params)
        ops = build_jump_operators(params, ALL_JUMPS if jumps is None else jumps, h.layout)
        return evolve_lindblad(h, ops, make_initial_state(initial, h.layout), t_grid, tol, store_states)
    h = build_effective_hamiltonian(params)
    state = make_initial_state(initial, h.layout)
    if model is Model.HYBRID:
        ops = build_jump_operators(params, (JumpFamily.HEATING,) if jumps is None else jumps, h.layout)
        return evolve_hybrid(h, ops, state, t_grid, tol, store_states)
    if jumps:
        raise ValueError("the effective (Schrodinger) model takes no jump operators")
    if isinstance(state, DensityState):
        # mixed initial state: propagate as a jump-free density matrix
        return evolve_hybrid(h, [], state, t_grid, tol, store_states)
    return evolve_schrodinger(h, state, t_grid, tol, store_states)
