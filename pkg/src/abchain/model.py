"""Synthetic-dimension basis and the Hamiltonians / jump operators built on it.

Basis states are ``|n, s>`` with ``n`` the phonon number (unit cell) and ``s``
the hyperfine sublattice.  Flat indices are cell-major:
``flat = n * len(sublattices) + rank(s)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .params import KHZ, MHZ, ChainParams, LambDicke, ParameterError, Uniform

__all__ = [
    "Sublattices",
    "BasisLayout",
    "LatticeOperator",
    "JumpFamily",
    "laguerre",
    "sideband_factor",
    "sideband_coupling",
    "intercell_couplings",
    "build_effective_hamiltonian",
    "build_coherent_hamiltonian",
    "build_jump_operators",
]


class Sublattices(enum.Enum):
    REDUCED = ("a", "b", "c")
    EXTENDED = ("a", "b", "c", "e", "r1", "r2")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.value


@dataclass(frozen=True)
class BasisLayout:
    n_cells: int
    sublattices: Sublattices = Sublattices.REDUCED

    def __post_init__(self) -> None:
        if self.n_cells < 1:
            raise ParameterError(f"n_cells must be positive, got {self.n_cells}")

    @property
    def n_sub(self) -> int:
        return len(self.sublattices.labels)

    @property
    def dim(self) -> int:
        return self.n_cells * self.n_sub

    def rank(self, sublattice: str) -> int:
        try:
            return self.sublattices.labels.index(sublattice)
        except ValueError:
            raise KeyError(
                f"sublattice {sublattice!r} not in {self.sublattices.labels}"
            ) from None

    def index(self, cell: int, sublattice: str) -> int:
        if not 0 <= cell < self.n_cells:
            raise IndexError(f"cell {cell} outside 0..{self.n_cells - 1}")
        return cell * self.n_sub + self.rank(sublattice)

    def label(self, flat: int) -> tuple[int, str]:
        """Inverse of :meth:`index`."""
        if not 0 <= flat < self.dim:
            raise IndexError(f"flat index {flat} outside 0..{self.dim - 1}")
        cell, r = divmod(flat, self.n_sub)
        return cell, self.sublattices.labels[r]

    def indices(self, sublattice: str) -> np.ndarray:
        """Flat indices of ``sublattice`` in every cell, ordered by cell."""
        return np.arange(self.n_cells) * self.n_sub + self.rank(sublattice)

    def conditional_mask(self) -> np.ndarray:
        """Sites kept when conditioning on no decay into the reservoir states."""
        mask = np.ones(self.dim, dtype=bool)
        if self.sublattices is Sublattices.EXTENDED:
            for s in ("r1", "r2"):
                mask[self.indices(s)] = False
        return mask

    def cell_of(self) -> np.ndarray:
        """Cell number of every flat index."""
        return np.repeat(np.arange(self.n_cells), self.n_sub)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """Dense complex operator over a :class:`BasisLayout`.

    The matrix is stored read-only so instances can be shared freely.
    """

    entries: np.ndarray
    layout: BasisLayout

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise ValueError(
                f"operator shape {m.shape} does not match layout dim {self.layout.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def hermiticity_defect(self) -> float:
        """``max |H - H^dagger|`` over all entries."""
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return self.hermiticity_defect() <= atol

    def norm(self) -> float:
        """Max absolute row sum (induced infinity norm)."""
        return float(np.max(np.sum(np.abs(self.entries), axis=1), initial=0.0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


class JumpFamily(enum.Enum):
    HEATING = "heating"
    DECAY_TO_C = "decay_to_c"
    DECAY_TO_RESERVOIR = "decay_to_reservoir"


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def laguerre(n: int, alpha: int, x: float) -> float:
    """Generalized Laguerre polynomial ``L_n^alpha(x)`` by upward recurrence."""
    if n < 0 or alpha < 0:
        raise ValueError(f"laguerre needs n >= 0 and alpha >= 0, got n={n}, alpha={alpha}")
    if n > 200:
        raise ValueError(f"laguerre supports n <= 200, got {n}")
    if x < 0:
        raise ValueError(f"laguerre needs x >= 0, got {x}")
    prev, cur = 1.0, 1.0 + alpha - x
    if n == 0:
        return prev
    for k in range(2, n + 1):
        prev, cur = cur, ((2 * k - 1 + alpha - x) * cur - (k - 1 + alpha) * prev) / k
    return cur


def sideband_factor(n: int, eta: float) -> float:
    """Dimensionless first-sideband matrix element ``|<n+1| exp(i eta (a + a^dag)) |n>|``."""
    return eta * math.exp(-eta * eta / 2) * math.sqrt(1.0 / (n + 1)) * laguerre(n, 1, eta * eta)


def sideband_coupling(n: int, params: ChainParams) -> float:
    """Intercell hopping ``J2(n)`` between ``|n,b>`` and ``|n+1,a>``, in kHz."""
    mode = params.j2_mode
    if isinstance(mode, Uniform):
        return mode.j2
    return mode.omega4_scale * sideband_factor(n, mode.eta)


def intercell_couplings(params: ChainParams) -> np.ndarray:
    """``J2(n)`` for every link ``n = 0 .. n_cells-2`` (kHz)."""
    return np.array([sideband_coupling(n, params) for n in range(params.n_cells - 1)])


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def _ring_and_links(h: np.ndarray, layout: BasisLayout, params: ChainParams) -> None:
    j1 = KHZ * params.j1
    ring = j1 * np.exp(1j * params.phi)
    j2 = KHZ * intercell_couplings(params)
    for n in range(layout.n_cells):
        a, b, c = (layout.index(n, s) for s in ("a", "b", "c"))
        h[c, a] += ring
        h[a, c] += np.conj(ring)
        h[c, b] += j1
        h[b, c] += j1
        h[a, b] += j1
        h[b, a] += j1
        if n + 1 < layout.n_cells:
            up = layout.index(n + 1, "a")
            h[up, b] += j2[n]
            h[b, up] += j2[n]


def _add_tilt(h: np.ndarray, layout: BasisLayout, delta_khz: float, sublattices: Iterable[str]) -> None:
    delta = KHZ * delta_khz
    for n in range(layout.n_cells):
        for s in sublattices:
            i = layout.index(n, s)
            h[i, i] += n * delta


def build_effective_hamiltonian(params: ChainParams) -> LatticeOperator:
    """Non-Hermitian tilted AB chain over ``(a, b, c)`` in rad/ms."""
    if params.n_cells < 2:
        raise ParameterError(f"n_cells must be >= 2, got {params.n_cells}")
    layout = BasisLayout(params.n_cells, Sublattices.REDUCED)
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    _add_tilt(h, layout, params.delta, ("a", "b", "c"))
    h[layout.indices("c"), layout.indices("c")] += -1j * KHZ * params.gamma
    _ring_and_links(h, layout, params)
    return LatticeOperator(h, layout)


def build_coherent_hamiltonian(params: ChainParams) -> LatticeOperator:
    """Hermitian Hamiltonian over ``(a, b, c, e, r1, r2)`` including the c-e pump.

    No tilt is applied unless ``params.tilt_in_coherent`` is set; the
    reservoir rows and columns stay zero.
    """
    if params.n_cells < 2:
        raise ParameterError(f"n_cells must be >= 2, got {params.n_cells}")
    layout = BasisLayout(params.n_cells, Sublattices.EXTENDED)
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    if params.tilt_in_coherent:
        _add_tilt(h, layout, params.delta, ("a", "b", "c", "e"))
    _ring_and_links(h, layout, params)
    je = MHZ * params.j_e
    c, e = layout.indices("c"), layout.indices("e")
    h[c, e] += je
    h[e, c] += je
    return LatticeOperator(h, layout)


def build_jump_operators(
    params: ChainParams,
    selection: Iterable[JumpFamily | str],
    layout: BasisLayout | None = None,
) -> list[LatticeOperator]:
    """Jump operators for the requested families, in family order.

    Heating gives ``sqrt(kappa)|n><n+1|`` then ``sqrt(kappa)|n+1><n|`` (each
    tensored with the spin identity) for every ``n``; the spin-flip decays are
    emitted once each since they do not depend on ``n``.
    """
    families = {JumpFamily(s) for s in selection}
    if layout is None:
        needs_ext = families & {JumpFamily.DECAY_TO_C, JumpFamily.DECAY_TO_RESERVOIR}
        layout = BasisLayout(
            params.n_cells, Sublattices.EXTENDED if needs_ext else Sublattices.REDUCED
        )
    if layout.n_cells != params.n_cells:
        raise ParameterError("layout n_cells differs from params.n_cells")
    if (
        families & {JumpFamily.DECAY_TO_C, JumpFamily.DECAY_TO_RESERVOIR}
        and layout.sublattices is not Sublattices.EXTENDED
    ):
        raise ParameterError("excited-state decays need the extended (a,b,c,e,r1,r2) layout")

    ops: list[LatticeOperator] = []
    d, ns = layout.dim, layout.n_sub
    if JumpFamily.HEATING in families:
        amp = math.sqrt(KHZ * params.kappa)
        down, up = [], []
        for n in range(layout.n_cells - 1):
            lo = np.zeros((d, d), dtype=complex)
            hi = np.zeros((d, d), dtype=complex)
            for r in range(ns):
                lo[n * ns + r, (n + 1) * ns + r] = amp
                hi[(n + 1) * ns + r, n * ns + r] = amp
            down.append(LatticeOperator(lo, layout))
            up.append(LatticeOperator(hi, layout))
        ops.extend(down)
        ops.extend(up)

    g_c, g_r1, g_r2 = (MHZ * g for g in params.decay_rates)

    def spin_jump(rate: float, target: str) -> LatticeOperator:
        m = np.zeros((d, d), dtype=complex)
        m[layout.indices(target), layout.indices("e")] = math.sqrt(rate)
        return LatticeOperator(m, layout)

    if JumpFamily.DECAY_TO_C in families:
        ops.append(spin_jump(g_c, "c"))
    if JumpFamily.DECAY_TO_RESERVOIR in families:
        ops.append(spin_jump(g_r1, "r1"))
        ops.append(spin_jump(g_r2, "r2"))
    return ops
