"""Phonon statistics, entropy, flux sweeps and trajectory comparisons."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Model, Trajectory, default_grid, run_model
from .model import BasisLayout
from .params import KHZ, ChainParams
from .states import BasisState, DensityState, InitialStateSpec, PureState

__all__ = [
    "PhononStats",
    "SweepResult",
    "TrajectoryDiff",
    "phonon_stats",
    "entropy",
    "finite_difference",
    "flux_sweep",
    "trajectory_diff",
    "norm_decay_residual",
    "NEGATIVE_EIGENVALUE_LIMIT",
]

NEGATIVE_EIGENVALUE_LIMIT = -1e-8
ZERO_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class PhononStats:
    mean: float
    variance: float
    fluctuation: float


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Final mean phonon number against flux and its finite-difference slope."""

    phi_grid: np.ndarray
    n_bar_final: np.ndarray
    derivative: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.phi_grid)
        if len(self.n_bar_final) != n or len(self.derivative) != n:
            raise ValueError("sweep arrays must share the grid length")

    def __len__(self) -> int:
        return len(self.phi_grid)


@dataclass(frozen=True, eq=False)
class TrajectoryDiff:
    times: np.ndarray
    per_cell: np.ndarray
    max_abs: float


def phonon_stats(state: PureState | DensityState, layout: BasisLayout | None = None) -> PhononStats:
    """Mean and variance of the cell index over post-selection-normalized populations.

    For the extended layout only the (a, b, c, e) sites are kept.
    """
    layout = layout or state.layout
    pops = state.site_populations()
    if pops.size != layout.dim:
        raise ValueError(f"state dim {pops.size} does not match layout dim {layout.dim}")
    pops = np.where(layout.conditional_mask(), pops, 0.0)
    total = pops.sum()
    if not total > 0:
        raise ValueError("phonon statistics need a state with nonzero norm or trace")
    p = pops.reshape(layout.n_cells, layout.n_sub).sum(axis=1) / total
    n = np.arange(layout.n_cells)
    mean = float(p @ n)
    var = max(float(p @ (n * n)) - mean * mean, 0.0)
    return PhononStats(mean, var, math.sqrt(var))


def entropy(rho: DensityState | np.ndarray) -> float:
    """Von Neumann entropy in nats of the trace-normalized density matrix."""
    m = np.asarray(rho.matrix if isinstance(rho, DensityState) else rho, dtype=complex)
    tr = float(np.trace(m).real)
    if not tr > 0:
        raise ValueError(f"entropy needs a positive trace, got {tr:g}")
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T) / tr)
    if ev[0] < NEGATIVE_EIGENVALUE_LIMIT:
        raise ValueError(f"density matrix has eigenvalue {ev[0]:.3e} below {NEGATIVE_EIGENVALUE_LIMIT:g}")
    ev = ev[ev > ZERO_EIGENVALUE]
    return float(-np.sum(ev * np.log(ev)))


def finite_difference(values: Sequence[float], grid: Sequence[float], periodic: bool = False) -> np.ndarray:
    """Central differences inside the grid, one-sided at the two ends.

    With ``periodic=True`` the values are taken as 2 pi periodic and the ends
    use wrapped central differences.  A grid whose last point repeats the
    first one (``grid[-1] - grid[0] == 2 pi``) is handled as well.
    """
    y = np.asarray(values, dtype=float)
    x = np.asarray(grid, dtype=float)
    if y.shape != x.shape or x.ndim != 1 or x.size < 3:
        raise ValueError("finite_difference needs matching 1-d grids of at least 3 points")
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (x[2:] - x[:-2])
    if periodic:
        closed = math.isclose(x[-1] - x[0], 2 * math.pi, rel_tol=0, abs_tol=1e-9)
        last = -2 if closed else -1
        wrapped = x[last] - 2 * math.pi
        d[0] = (y[1] - y[last]) / (x[1] - wrapped)
        if closed:
            d[-1] = d[0]
        else:
            d[-1] = (y[0] - y[-2]) / (x[0] + 2 * math.pi - x[-2])
    else:
        d[0] = (y[1] - y[0]) / (x[1] - x[0])
        d[-1] = (y[-1] - y[-2]) / (x[-1] - x[-2])
    return d


def _final_n_bar(args: tuple) -> float:
    params, model, initial, t_grid, tol = args
    return float(run_model(params, model, initial, t_grid, tol).mean_phonon[-1])


def flux_sweep(
    base: ChainParams,
    phi_grid: Sequence[float],
    t_final: float = 0.2,
    model: Model | str = Model.EFFECTIVE,
    initial_state: InitialStateSpec = BasisState(7, "a"),
    points: int = 101,
    tol: float = 1e-6,
    workers: int = 1,
    periodic: bool = False,
) -> SweepResult:
    """Final mean phonon number after ``t_final`` ms for every flux in ``phi_grid``.

    Independent runs fan out over ``workers`` processes; results are gathered
    in grid order.
    """
    phis = np.asarray(phi_grid, dtype=float)
    if phis.ndim != 1 or phis.size < 9:
        raise ValueError(f"flux sweep needs at least 9 grid points, got {phis.size}")
    if np.any(np.abs(phis) > math.pi + 1e-12):
        raise ValueError("flux grid must lie within [-pi, pi]")
    if np.any(np.diff(phis) <= 0):
        raise ValueError("flux grid must be strictly increasing")
    t_grid = default_grid(t_final, points)
    model = Model(model)
    jobs = [(base.replace(phi=float(p)), model, initial_state, t_grid, tol) for p in phis]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            n_bar = np.array(list(pool.map(_final_n_bar, jobs)))
    else:
        n_bar = np.array([_final_n_bar(j) for j in jobs])
    return SweepResult(phis, n_bar, finite_difference(n_bar, phis, periodic))


def trajectory_diff(a: Trajectory, b: Trajectory) -> TrajectoryDiff:
    """Per-time, per-cell difference ``a - b`` of normalized cell populations."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled on different time grids")
    if a.n_cells != b.n_cells:
        raise ValueError(f"trajectories have {a.n_cells} and {b.n_cells} cells")
    diff = a.cell_populations - b.cell_populations
    return TrajectoryDiff(a.times.copy(), diff, float(np.max(np.abs(diff), initial=0.0)))


def norm_decay_residual(traj: Trajectory, gamma_khz: float) -> float:
    """Relative mismatch between ``d|psi|^2/dt`` and ``-2 gamma P_c``.

    The norm derivative is taken numerically with the fourth-order central
    stencil on interior points, so the grid must resolve the dynamics.
    Returns ``max |lhs - rhs| / max |rhs|`` over those points.
    """
    t, w = traj.times, traj.weight
    if t.size < 5:
        raise ValueError("norm-decay check needs at least 5 time points")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("norm-decay check needs a uniform time grid")
    lhs = (w[:-4] - 8 * w[1:-3] + 8 * w[3:-1] - w[4:]) / (12 * h[0])
    p_c = w * traj.sublattice_population("c")
    rhs = -2.0 * KHZ * gamma_khz * p_c[2:-2]
    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        return float(np.max(np.abs(lhs)))
    return float(np.max(np.abs(lhs - rhs)) / scale)
