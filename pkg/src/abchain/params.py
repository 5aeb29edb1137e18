"""Physical parameters of the tilted dissipative AB chain.

Frequencies are stored as plain frequencies (``nu``), in kHz for the lattice
rates and in MHz for the excited-state linewidth and the pump coupling.  The
operator builders convert them to angular frequencies in rad/ms.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

__all__ = [
    "ParameterError",
    "Uniform",
    "LambDicke",
    "ChainParams",
    "KHZ",
    "MHZ",
    "angular",
    "load_params",
    "params_from_mapping",
]

# nu [kHz] -> omega [rad/ms]
KHZ = 2.0 * math.pi
# nu [MHz] -> omega [rad/ms]
MHZ = 2.0 * math.pi * 1.0e3

DEFAULT_BRANCHING = (1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0)


class ParameterError(ValueError):
    """Raised when a parameter record violates its invariants."""


def angular(nu_khz: float) -> float:
    """Convert a frequency in kHz to an angular rate in rad/ms."""
    return KHZ * nu_khz


@dataclass(frozen=True)
class Uniform:
    """Constant intercell hopping ``j2`` (kHz)."""

    j2: float = 10.0

    def validate(self) -> None:
        if not math.isfinite(self.j2) or self.j2 < 0:
            raise ParameterError(f"j2 must be a finite rate >= 0, got {self.j2!r}")


@dataclass(frozen=True)
class LambDicke:
    """Sideband hopping with the full Debye-Waller/Laguerre n-dependence.

    ``omega4_scale`` (kHz) multiplies the dimensionless matrix element
    ``eta exp(-eta^2/2) sqrt(1/(n+1)) L_n^1(eta^2)``.
    """

    omega4_scale: float
    eta: float = 0.35

    def validate(self) -> None:
        if not math.isfinite(self.omega4_scale) or self.omega4_scale < 0:
            raise ParameterError(
                f"omega4_scale must be a finite rate >= 0, got {self.omega4_scale!r}"
            )
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ParameterError(f"eta must be > 0 in LambDicke mode, got {self.eta!r}")

    @classmethod
    def with_mean(cls, mean_j2: float, eta: float = 0.35, n_avg: int = 15) -> "LambDicke":
        """Pick ``omega4_scale`` so the mean of J2(n) over n in [0, n_avg) equals ``mean_j2``."""
        from .model import sideband_factor

        mean_factor = sum(sideband_factor(n, eta) for n in range(n_avg)) / n_avg
        return cls(omega4_scale=mean_j2 / mean_factor, eta=eta)


J2Mode = Uniform | LambDicke


@dataclass(frozen=True)
class ChainParams:
    """Complete parameter record for one simulation.

    Attributes
    ----------
    n_cells : int
        Number of phonon Fock states kept (cells ``n = 0 .. n_cells-1``).
    j1, delta, gamma, kappa : float
        Intracell hopping, tilt per cell, loss on site c and heating rate (kHz).
    j2_mode : Uniform or LambDicke
        Intercell hopping model.
    phi : float
        Synthetic flux in radians.
    big_gamma, j_e : float
        Excited-state linewidth and c-e pump coupling (MHz).
    branching : tuple of float
        Fractions ``(Gamma_c, Gamma_r1, Gamma_r2) / Gamma``.
    tilt_in_coherent : bool
        Add the ``n delta`` ladder to the coherent (extended) Hamiltonian.
        Off by default, so the coherent Hamiltonian carries no tilt.
    """

    n_cells: int = 15
    j1: float = 20.0
    j2_mode: J2Mode = field(default_factory=Uniform)
    phi: float = -math.pi / 2
    delta: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0
    big_gamma: float = 19.4
    j_e: float = 0.98
    branching: tuple[float, float, float] = DEFAULT_BRANCHING
    tilt_in_coherent: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "branching", tuple(float(b) for b in self.branching))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n_cells, int) or isinstance(self.n_cells, bool):
            raise ParameterError(f"n_cells must be an integer, got {self.n_cells!r}")
        if self.n_cells < 2:
            raise ParameterError(f"n_cells must be >= 2, got {self.n_cells}")
        for name in ("j1", "gamma", "kappa", "big_gamma", "j_e"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be a finite rate >= 0, got {value!r}")
        if not math.isfinite(self.delta):
            raise ParameterError(f"delta must be finite, got {self.delta!r}")
        if not -math.pi - 1e-12 <= self.phi <= math.pi + 1e-12:
            raise ParameterError(f"phi must lie in [-pi, pi], got {self.phi!r}")
        if not isinstance(self.j2_mode, (Uniform, LambDicke)):
            raise ParameterError(f"unknown j2_mode {self.j2_mode!r}")
        self.j2_mode.validate()
        if len(self.branching) != 3 or any(b < 0 for b in self.branching):
            raise ParameterError(f"branching must be three fractions >= 0, got {self.branching!r}")
        if abs(sum(self.branching) - 1.0) > 1e-9:
            raise ParameterError(f"branching fractions must sum to 1, got {sum(self.branching)!r}")

    # -- derived quantities -------------------------------------------------

    @property
    def effective_gamma(self) -> float:
        """``J_e^2 / Gamma`` expressed in kHz."""
        if self.big_gamma == 0:
            raise ParameterError("big_gamma must be > 0 to form J_e^2/Gamma")
        return (self.j_e * 1e3) ** 2 / (self.big_gamma * 1e3)

    @property
    def adiabatic_gamma(self) -> float:
        """Loss rate on c after eliminating the excited state, in kHz.

        ``2 J_e^2 (Gamma_r1 + Gamma_r2) / Gamma^2``; equals ``J_e^2/Gamma``
        for the natural branching ratio where half the decays return to c.
        """
        _, r1, r2 = self.branching
        return 2.0 * (r1 + r2) * self.effective_gamma

    def gamma_consistent(self, rtol: float = 1e-6) -> bool:
        """True when ``gamma`` equals ``J_e^2/Gamma`` within ``rtol``."""
        target = self.effective_gamma
        return abs(self.gamma - target) <= rtol * max(abs(target), abs(self.gamma))

    @property
    def decay_rates(self) -> tuple[float, float, float]:
        """``(Gamma_c, Gamma_r1, Gamma_r2)`` in MHz."""
        return tuple(b * self.big_gamma for b in self.branching)  # type: ignore[return-value]

    def replace(self, **changes: Any) -> "ChainParams":
        return dataclasses.replace(self, **changes)

    def to_mapping(self) -> dict[str, Any]:
        """Flat, serialisable view using the config-file key names."""
        out: dict[str, Any] = {
            "n_cells": self.n_cells,
            "j1": self.j1,
            "phi": self.phi,
            "delta": self.delta,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "big_gamma": self.big_gamma,
            "j_e": self.j_e,
            "branching": list(self.branching),
            "tilt_in_coherent": self.tilt_in_coherent,
        }
        if isinstance(self.j2_mode, Uniform):
            out["j2_mode"] = {"kind": "uniform", "j2": self.j2_mode.j2}
        else:
            out["j2_mode"] = {
                "kind": "lamb_dicke",
                "omega4_scale": self.j2_mode.omega4_scale,
                "eta": self.j2_mode.eta,
            }
        return out


_FIELDS = {f.name for f in dataclasses.fields(ChainParams)}


def _parse_j2_mode(raw: Any) -> J2Mode:
    if isinstance(raw, (Uniform, LambDicke)):
        return raw
    if not isinstance(raw, Mapping):
        raise ParameterError(f"j2_mode must be a mapping, got {raw!r}")
    kind = str(raw.get("kind", "uniform")).lower().replace("-", "_")
    if kind == "uniform":
        return Uniform(j2=float(raw.get("j2", 10.0)))
    if kind in ("lamb_dicke", "lambdicke"):
        eta = float(raw.get("eta", 0.35))
        if "omega4_scale" in raw:
            return LambDicke(omega4_scale=float(raw["omega4_scale"]), eta=eta)
        if "mean_j2" in raw:
            return LambDicke.with_mean(float(raw["mean_j2"]), eta=eta)
        raise ParameterError("lamb_dicke j2_mode needs omega4_scale or mean_j2")
    raise ParameterError(f"unknown j2_mode kind {kind!r}")


def params_from_mapping(data: Mapping[str, Any], base: ChainParams | None = None) -> ChainParams:
    """Build a ``ChainParams`` from a key-value mapping, starting from ``base``.

    Unknown keys raise ``ParameterError`` naming the offending field.
    """
    unknown = set(data) - _FIELDS
    if unknown:
        raise ParameterError(f"unknown parameter field(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        try:
            if key == "j2_mode":
                kwargs[key] = _parse_j2_mode(value)
            elif key == "n_cells":
                if float(value) != int(value):
                    raise ValueError("not an integer")
                kwargs[key] = int(value)
            elif key == "branching":
                kwargs[key] = tuple(float(v) for v in value)
            elif key == "tilt_in_coherent":
                kwargs[key] = _as_bool(value)
            else:
                kwargs[key] = float(value)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"{key}: cannot parse {value!r} ({exc})") from exc
    base = base or ChainParams()
    return dataclasses.replace(base, **kwargs)


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def load_params(path: str | Path, base: ChainParams | None = None) -> ChainParams:
    """Read a YAML (or JSON) document whose keys are ``ChainParams`` fields."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ParameterError(f"{path}: expected a mapping at top level")
    return params_from_mapping(data, base)
