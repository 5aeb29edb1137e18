"""Pure and mixed states over a :class:`~abchain.model.BasisLayout`."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import BasisLayout

__all__ = [
    "PureState",
    "DensityState",
    "BasisState",
    "Gaussian",
    "Thermal",
    "InitialStateSpec",
    "make_initial_state",
    "as_density",
    "TruncationWarning",
    "density_entropy",
    "thermal_weights",
]


class TruncationWarning(UserWarning):
    """Population reached the artificial top of the truncated phonon ladder."""


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    layout: BasisLayout

    def __post_init__(self) -> None:
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape != (self.layout.dim,):
            raise ValueError(f"state length {v.size} does not match layout dim {self.layout.dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state has non-finite amplitudes")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def weight(self) -> float:
        """Squared norm."""
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def site_populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class DensityState:
    matrix: np.ndarray
    layout: BasisLayout

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise ValueError(f"density shape {m.shape} does not match layout dim {self.layout.dim}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def weight(self) -> float:
        """Trace."""
        return float(np.trace(self.matrix).real)

    def site_populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


def as_density(state: PureState | DensityState) -> DensityState:
    if isinstance(state, DensityState):
        return state
    v = state.amplitudes
    return DensityState(np.outer(v, v.conj()), state.layout)


# -- initial-state specifications ---------------------------------------------


@dataclass(frozen=True)
class BasisState:
    n: int = 7
    sublattice: str = "a"


@dataclass(frozen=True)
class Gaussian:
    """Amplitudes ``exp(-width (n - center)^2)`` on one sublattice."""

    center: float = 7.0
    width: float = 0.1
    sublattice: str = "a"


@dataclass(frozen=True)
class Thermal:
    """Diagonal phonon distribution ``n_bar^n / (n_bar+1)^(n+1)`` on one sublattice."""

    n_bar: float = 7.0
    sublattice: str = "a"


InitialStateSpec = BasisState | Gaussian | Thermal


def thermal_weights(n_bar: float, n_cells: int) -> np.ndarray:
    """Untruncated geometric probabilities for ``n = 0 .. n_cells-1``."""
    n = np.arange(n_cells)
    return np.exp(n * math.log(n_bar) - (n + 1) * math.log(n_bar + 1)) if n_bar > 0 else (n == 0) * 1.0


def make_initial_state(spec: InitialStateSpec, layout: BasisLayout) -> PureState | DensityState:
    """Normalized initial state; a thermal spec gives a diagonal density matrix."""
    if isinstance(spec, BasisState):
        v = np.zeros(layout.dim, dtype=complex)
        v[layout.index(spec.n, spec.sublattice)] = 1.0
        return PureState(v, layout)
    if isinstance(spec, Gaussian):
        v = np.zeros(layout.dim, dtype=complex)
        n = np.arange(layout.n_cells)
        v[layout.indices(spec.sublattice)] = np.exp(-spec.width * (n - spec.center) ** 2)
        return PureState(v / np.linalg.norm(v), layout)
    if isinstance(spec, Thermal):
        if spec.n_bar < 0:
            raise ValueError(f"n_bar must be >= 0, got {spec.n_bar}")
        p = thermal_weights(spec.n_bar, layout.n_cells)
        lost = 1.0 - p.sum()
        if lost > 0.05:
            warnings.warn(
                f"thermal state with n_bar={spec.n_bar} loses {lost:.1%} of its weight "
                f"above n={layout.n_cells - 1}; renormalizing over the kept cells",
                TruncationWarning,
                stacklevel=2,
            )
        diag = np.zeros(layout.dim)
        diag[layout.indices(spec.sublattice)] = p / p.sum()
        return DensityState(np.diag(diag).astype(complex), layout)
    raise TypeError(f"unknown initial-state spec {spec!r}")


def density_entropy(rho: np.ndarray, eigenvalues: bool = False, cutoff: float = 1e-12) -> float:
    """Von Neumann entropy (nats) of a trace-normalized density matrix.

    With ``eigenvalues=True`` the argument is already its spectrum.
    Eigenvalues below ``cutoff`` contribute nothing.
    """
    ev = np.asarray(rho, dtype=float) if eigenvalues else np.linalg.eigvalsh(rho)
    ev = ev[ev > cutoff]
    return float(-np.sum(ev * np.log(ev)))
