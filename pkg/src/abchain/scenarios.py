"""Named experiment configurations and the pipelines that execute them.

Each built-in scenario reproduces one figure of the study as CSV tables (plus
optional PNG renderings).  A scenario is a :class:`ScenarioConfig`; config
files and ``--set`` overrides are merged onto a built-in base.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import yaml

from .dynamics import Model, Trajectory, run_model
from .model import JumpFamily, build_effective_hamiltonian, sideband_coupling
from .observables import SweepResult, finite_difference, trajectory_diff
from .output import OutputError, emit_plotdata, write_cell_table, write_csv, write_diff_table, write_eigen_tables
from .params import ChainParams, LambDicke, ParameterError, Uniform, params_from_mapping
from .spectral import spectrum_profiles
from .states import BasisState, Gaussian, InitialStateSpec, Thermal

__all__ = [
    "Scenario",
    "TimeGrid",
    "FluxGrid",
    "ScenarioConfig",
    "ScenarioResult",
    "BUILTIN",
    "OUTPUT_ENV",
    "builtin",
    "scenario_from_mapping",
    "load_scenario",
    "apply_overrides",
    "run_scenario",
    "state_label",
]

OUTPUT_ENV = "ABCHAIN_OUT"
DEFAULT_OUTPUT = "results"


class Scenario(enum.Enum):
    EIGEN = "eigen"
    BULK_DYNAMICS = "bulk_dynamics"
    BOUNDARY_DYNAMICS = "boundary_dynamics"
    BLOCH_COMPETITION = "bloch_competition"
    COOLING = "cooling"
    FLUX_SENSE = "flux_sense"
    IMPERFECTION_LADDER = "imperfection_ladder"
    ERROR_ESTIMATE = "error_estimate"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TimeGrid:
    t_final: float = 1.0
    points: int = 501

    def __post_init__(self) -> None:
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ParameterError(f"t_final must be > 0, got {self.t_final!r}")
        if self.points < 2:
            raise ParameterError(f"points must be >= 2, got {self.points!r}")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.points)


@dataclass(frozen=True)
class FluxGrid:
    phi_min: float = -math.pi
    phi_max: float = math.pi
    points: int = 41
    periodic: bool = False

    def __post_init__(self) -> None:
        if self.points < 9:
            raise ParameterError(f"phi_points must be >= 9, got {self.points}")
        lo, hi = -math.pi - 1e-12, math.pi + 1e-12
        if not (lo <= self.phi_min < self.phi_max <= hi):
            raise ParameterError(f"flux range [{self.phi_min}, {self.phi_max}] must lie within [-pi, pi]")

    def grid(self) -> np.ndarray:
        return np.linspace(self.phi_min, self.phi_max, self.points)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one scenario run.

    Attributes
    ----------
    gammas : tuple of float
        Loss rates (kHz) to run side by side; empty means ``params.gamma`` only.
    jumps : tuple of JumpFamily or None
        Jump families for density-matrix models; ``None`` picks the model default.
    gamma_from_pump : bool
        Effective-model runs in the Lindblad comparisons use the loss rate
        implied by ``j_e``, ``big_gamma`` and the branching ratios.
    ideal_reference : bool
        Flux sweeps also run the ideal chain (uniform J2, no heating,
        effective model).
    """

    name: str
    kind: Scenario
    params: ChainParams = field(default_factory=ChainParams)
    initial_states: tuple[InitialStateSpec, ...] = (BasisState(7, "a"),)
    time: TimeGrid = TimeGrid()
    model: Model = Model.EFFECTIVE
    gammas: tuple[float, ...] = ()
    jumps: tuple[JumpFamily, ...] | None = None
    flux: FluxGrid = FluxGrid()
    tol: float = 1e-6
    gamma_from_pump: bool = False
    ideal_reference: bool = True
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.initial_states:
            raise ParameterError("initial_states must not be empty")
        if not (0 < self.tol < 1):
            raise ParameterError(f"tol must lie in (0, 1), got {self.tol!r}")
        for g in self.gammas:
            if not (g >= 0 and math.isfinite(g)):
                raise ParameterError(f"gammas entries must be finite rates >= 0, got {g!r}")
        last = self.params.n_cells - 1
        for spec in () if self.kind is Scenario.EIGEN else self.initial_states:
            cell = spec.n if isinstance(spec, BasisState) else getattr(spec, "center", 0)
            if not (0 <= cell <= last):
                raise ParameterError(f"initial state {state_label(spec)} lies outside cells 0..{last}")

    def gamma_values(self) -> tuple[float, ...]:
        return self.gammas or (self.params.gamma,)

    def to_mapping(self) -> dict[str, Any]:
        """Serialisable view; ``out_dir`` is left out so it does not affect the hash."""
        return {
            "name": self.name,
            "kind": self.kind.value,
            "params": self.params.to_mapping(),
            "initial_states": [_state_mapping(s) for s in self.initial_states],
            "t_final": self.time.t_final,
            "points": self.time.points,
            "model": self.model.value,
            "gammas": list(self.gammas),
            "jumps": None if self.jumps is None else [j.value for j in self.jumps],
            "phi_min": self.flux.phi_min,
            "phi_max": self.flux.phi_max,
            "phi_points": self.flux.points,
            "periodic_sweep": self.flux.periodic,
            "tol": self.tol,
            "gamma_from_pump": self.gamma_from_pump,
            "ideal_reference": self.ideal_reference,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# initial-state specs
# ---------------------------------------------------------------------------


def state_label(spec: InitialStateSpec) -> str:
    if isinstance(spec, BasisState):
        return f"n{spec.n}{spec.sublattice}"
    if isinstance(spec, Gaussian):
        return f"gauss{spec.center:g}{spec.sublattice}"
    if isinstance(spec, Thermal):
        return f"thermal{spec.n_bar:g}{spec.sublattice}"
    raise TypeError(f"unknown initial-state spec {spec!r}")


def _state_mapping(spec: InitialStateSpec) -> dict[str, Any]:
    if isinstance(spec, BasisState):
        return {"kind": "basis", "n": spec.n, "sublattice": spec.sublattice}
    if isinstance(spec, Gaussian):
        return {"kind": "gaussian", "center": spec.center, "width": spec.width, "sublattice": spec.sublattice}
    return {"kind": "thermal", "n_bar": spec.n_bar, "sublattice": spec.sublattice}


def _parse_state(raw: Any) -> InitialStateSpec:
    if isinstance(raw, (BasisState, Gaussian, Thermal)):
        return raw
    if not isinstance(raw, Mapping):
        raise ParameterError(f"initial state must be a mapping, got {raw!r}")
    data = dict(raw)
    kind = str(data.pop("kind", "basis")).lower()
    fields = {
        "basis": (BasisState, {"n": int, "sublattice": str}),
        "gaussian": (Gaussian, {"center": float, "width": float, "sublattice": str}),
        "thermal": (Thermal, {"n_bar": float, "sublattice": str}),
    }
    if kind not in fields:
        raise ParameterError(f"initial_states: unknown kind {kind!r}")
    cls, casts = fields[kind]
    unknown = set(data) - set(casts)
    if unknown:
        raise ParameterError(f"initial_states: unknown field(s) {', '.join(sorted(unknown))} for kind {kind}")
    try:
        return cls(**{k: casts[k](v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"initial_states: {exc}") from exc


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------

FIG2 = ChainParams(j1=20.0, j2_mode=Uniform(10.0), phi=-math.pi / 2, delta=0.0)
LD_MEAN_10 = LambDicke.with_mean(10.0, eta=0.35)


def _builtins() -> dict[str, ScenarioConfig]:
    both = (0.0, 50.0)
    cooling = FIG2.replace(j2_mode=LD_MEAN_10, kappa=0.3, gamma=50.0, n_cells=45)
    sensing = FIG2.replace(j1=100.0, j2_mode=LD_MEAN_10, kappa=0.3, gamma=50.0)
    pumped = FIG2.replace(j2_mode=LD_MEAN_10, kappa=0.3, gamma=50.0, j_e=0.98, big_gamma=19.4)
    items = [
        ScenarioConfig("fig2-hermitian", Scenario.EIGEN, FIG2.replace(gamma=0.0)),
        ScenarioConfig("fig2-nonhermitian", Scenario.EIGEN, FIG2.replace(gamma=50.0)),
        ScenarioConfig("fig2-bulk", Scenario.BULK_DYNAMICS, FIG2.replace(gamma=50.0), (BasisState(7, "a"),), gammas=both),
        ScenarioConfig(
            "fig2-boundary", Scenario.BOUNDARY_DYNAMICS, FIG2.replace(gamma=50.0), (BasisState(0, "a"),), gammas=both
        ),
        ScenarioConfig(
            "fig3-bloch",
            Scenario.BLOCH_COMPETITION,
            FIG2.replace(delta=5.0, gamma=50.0),
            (BasisState(7, "a"), Gaussian(7.0, 0.1, "a")),
            gammas=both,
        ),
        ScenarioConfig(
            "fig5-cooling",
            Scenario.COOLING,
            cooling,
            (BasisState(7, "a"), Thermal(7.0, "a")),
            model=Model.HYBRID,
            gammas=both,
        ),
        ScenarioConfig(
            "fig6-sensing",
            Scenario.FLUX_SENSE,
            sensing,
            (BasisState(7, "a"),),
            time=TimeGrid(0.2, 101),
            model=Model.HYBRID,
        ),
        ScenarioConfig(
            "fig7-imperfections", Scenario.IMPERFECTION_LADDER, pumped, (BasisState(7, "a"),), gamma_from_pump=True
        ),
        ScenarioConfig(
            "fig8-error", Scenario.ERROR_ESTIMATE, pumped, (BasisState(7, "a"),), model=Model.HYBRID, gamma_from_pump=True
        ),
        ScenarioConfig("custom", Scenario.CUSTOM, ChainParams()),
    ]
    return {s.name: s for s in items}


BUILTIN: dict[str, ScenarioConfig] = _builtins()


def builtin(name: str) -> ScenarioConfig:
    try:
        return BUILTIN[name]
    except KeyError:
        raise ParameterError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN)}") from None


# ---------------------------------------------------------------------------
# config files and overrides
# ---------------------------------------------------------------------------

_PARAM_KEYS = {f.name for f in dataclasses.fields(ChainParams)}
_SCENARIO_KEYS = {
    "scenario",
    "name",
    "kind",
    "params",
    "initial_states",
    "t_final",
    "points",
    "model",
    "gammas",
    "jumps",
    "phi_min",
    "phi_max",
    "phi_points",
    "periodic_sweep",
    "tol",
    "gamma_from_pump",
    "ideal_reference",
    "out_dir",
}


def apply_overrides(base: ScenarioConfig, data: Mapping[str, Any]) -> ScenarioConfig:
    """Merge a flat or nested mapping of overrides onto ``base``.

    ChainParams fields may sit at top level or under ``params``.  Setting
    ``gamma`` without ``gammas`` collapses a multi-rate scenario to that
    single rate.
    """
    unknown = set(data) - _SCENARIO_KEYS - _PARAM_KEYS
    if unknown:
        raise ParameterError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    param_data = {k: v for k, v in data.items() if k in _PARAM_KEYS}
    nested = data.get("params") or {}
    if not isinstance(nested, Mapping):
        raise ParameterError("params must be a mapping")
    overlap = set(nested) & set(param_data)
    if overlap:
        raise ParameterError(f"field(s) given both at top level and under params: {', '.join(sorted(overlap))}")
    param_data.update(nested)
    params = params_from_mapping(param_data, base.params) if param_data else base.params

    changes: dict[str, Any] = {"params": params}
    try:
        if "name" in data:
            changes["name"] = str(data["name"])
        if "kind" in data:
            changes["kind"] = Scenario(str(data["kind"]).lower())
        if "initial_states" in data:
            raw = data["initial_states"]
            raw = [raw] if isinstance(raw, Mapping) else list(raw)
            changes["initial_states"] = tuple(_parse_state(s) for s in raw)
        if "t_final" in data or "points" in data:
            changes["time"] = TimeGrid(
                float(data.get("t_final", base.time.t_final)), int(data.get("points", base.time.points))
            )
        if "model" in data:
            changes["model"] = Model(str(data["model"]).lower())
        if "gammas" in data:
            raw = data["gammas"]
            changes["gammas"] = () if raw is None else tuple(float(g) for g in (raw if isinstance(raw, (list, tuple)) else [raw]))
        elif "gamma" in param_data:
            changes["gammas"] = ()
        if "jumps" in data:
            raw = data["jumps"]
            changes["jumps"] = None if raw is None else tuple(JumpFamily(str(j).lower()) for j in raw)
        if {"phi_min", "phi_max", "phi_points", "periodic_sweep"} & set(data):
            changes["flux"] = FluxGrid(
                float(data.get("phi_min", base.flux.phi_min)),
                float(data.get("phi_max", base.flux.phi_max)),
                int(data.get("phi_points", base.flux.points)),
                _as_bool(data.get("periodic_sweep", base.flux.periodic)),
            )
        if "tol" in data:
            changes["tol"] = float(data["tol"])
        if "gamma_from_pump" in data:
            changes["gamma_from_pump"] = _as_bool(data["gamma_from_pump"])
        if "ideal_reference" in data:
            changes["ideal_reference"] = _as_bool(data["ideal_reference"])
        if "out_dir" in data:
            changes["out_dir"] = None if data["out_dir"] is None else str(data["out_dir"])
    except ParameterError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"invalid scenario field: {exc}") from exc
    return dataclasses.replace(base, **changes)


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def scenario_from_mapping(data: Mapping[str, Any], default: str = "custom") -> ScenarioConfig:
    """Config mapping -> ScenarioConfig, starting from the built-in named by ``scenario``."""
    base = builtin(str(data.get("scenario", default)))
    return apply_overrides(base, data)


def load_scenario(path: str | Path, default: str = "custom") -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if not isinstance(data, Mapping):
        raise ParameterError(f"{path}: expected a mapping at top level")
    return scenario_from_mapping(data, default)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Run:
    label: str
    params: ChainParams
    model: Model
    initial: InitialStateSpec
    jumps: tuple[JumpFamily, ...] | None


def _execute(job: tuple[_Run, np.ndarray, float]) -> Trajectory:
    run, t_grid, tol = job
    return run_model(run.params, run.model, run.initial, t_grid, tol, run.jumps)


def _final_sweep_point(job: tuple[_Run, np.ndarray, float]) -> tuple[float, float]:
    traj = _execute(job)
    return float(traj.mean_phonon[-1]), traj.top_cell_max


def _map(fn: Callable, jobs: Sequence, threads: int) -> list:
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


@dataclass
class ScenarioResult:
    """Outcome of :func:`run_scenario`.

    ``summary`` holds the key observables in insertion order; ``top_cell``
    is the worst top-cell population over all trajectories (``nan`` when no
    dynamics were run).
    """

    config: ScenarioConfig
    directory: Path
    files: list[Path]
    summary: dict[str, float]
    top_cell: float
    runtime: float
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    sweeps: dict[str, SweepResult] = field(default_factory=dict)

    @property
    def truncation_ok(self) -> bool:
        from .dynamics import TOP_CELL_LIMIT

        return not (self.top_cell >= TOP_CELL_LIMIT)

    def summary_line(self) -> str:
        from .dynamics import TOP_CELL_LIMIT

        items = " ".join(f"{k}={v:.4g}" for k, v in self.summary.items())
        if math.isnan(self.top_cell):
            trunc = "truncation n/a"
        elif self.truncation_ok:
            trunc = f"truncation ok (top cell max {self.top_cell:.2e})"
        else:
            trunc = f"TRUNCATION WARNING (worst top cell {self.top_cell:.3e} >= {TOP_CELL_LIMIT:g})"
        return f"{self.config.name}: {items} | runtime {self.runtime:.1f} s | {trunc}"


def output_directory(config: ScenarioConfig, out_dir: str | Path | None = None) -> Path:
    root = out_dir or config.out_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    return Path(root) / config.name


def _dynamics_runs(config: ScenarioConfig) -> list[_Run]:
    runs = []
    for g in config.gamma_values():
        for spec in config.initial_states:
            label = f"{state_label(spec)}_g{g:g}"
            runs.append(_Run(label, config.params.replace(gamma=g), config.model, spec, config.jumps))
    return runs


def _mean_j2(params: ChainParams, n_avg: int = 15) -> float:
    return float(np.mean([sideband_coupling(n, params) for n in range(n_avg)]))


def run_scenario(
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
    figures: bool = True,
) -> ScenarioResult:
    """Execute ``config``, write its CSV tables (and figures) and return the result."""
    start = time.perf_counter()
    directory = output_directory(config, out_dir)
    meta = {"scenario": config.name, "kind": config.kind.value, "config_sha256": config.config_hash()}
    result = ScenarioResult(config, directory, [], {}, float("nan"), 0.0)

    handler = _PIPELINES[config.kind]
    handler(config, directory, meta, threads, figures, result)

    config_path = directory / "config.yaml"
    try:
        directory.mkdir(parents=True, exist_ok=True)
        config_path.write_text(yaml.safe_dump(config.to_mapping(), sort_keys=True), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {config_path}: {exc.strerror or exc}") from exc
    result.files.append(config_path)
    tops = [t.top_cell_max for t in result.trajectories.values()]
    if not math.isnan(result.top_cell):
        tops.append(result.top_cell)
    if tops:
        result.top_cell = max(tops)
    result.files.append(
        write_csv(directory / "summary.csv", ("key", "value"), result.summary.items(), meta)
    )
    result.runtime = time.perf_counter() - start
    return result


def _eigen(config, directory, meta, threads, figures, result) -> None:
    gammas = config.gamma_values()
    for g in gammas:
        h = build_effective_hamiltonian(config.params.replace(gamma=g))
        lam, weights = spectrum_profiles(h)
        prefix = "" if len(gammas) == 1 else f"g{g:g}_"
        result.files.extend(write_eigen_tables(lam, weights, directory, meta, prefix))
        mean_cell = weights @ np.arange(h.layout.n_cells)
        result.summary[f"mean_cell_g{g:g}"] = float(np.mean(mean_cell))
        result.summary[f"max_abs_im_lambda_g{g:g}"] = float(np.max(np.abs(lam.imag)))
        if figures:
            from .plotting import plot_spectrum

            result.files.append(plot_spectrum(lam, weights, directory / f"{prefix}spectrum.png", f"gamma = {g:g} kHz"))


def _write_runs(runs: dict[str, Trajectory], directory: Path, meta, result: ScenarioResult) -> None:
    for label, traj in runs.items():
        result.trajectories[label] = traj
        result.files.append(emit_plotdata(traj, directory / f"trajectory_{label}.csv", meta))
        result.files.append(write_cell_table(traj, directory / f"cells_{label}.csv", meta))


def _dynamics(config, directory, meta, threads, figures, result) -> None:
    runs = _dynamics_runs(config)
    t = config.time.grid()
    trajs = _map(_execute, [(r, t, config.tol) for r in runs], threads)
    done = {r.label: tr for r, tr in zip(runs, trajs)}
    _write_runs(done, directory, meta, result)
    for label, traj in done.items():
        result.summary[f"n_bar_final_{label}"] = float(traj.mean_phonon[-1])
        if config.kind is Scenario.BLOCH_COMPETITION:
            result.summary[f"n_bar_p2p_{label}"] = float(np.ptp(traj.mean_phonon))
        if config.kind is Scenario.COOLING:
            result.summary[f"fluctuation_final_{label}"] = float(traj.fluctuation[-1])
            result.summary[f"entropy_final_{label}"] = float(traj.entropy[-1])
    if figures:
        from .plotting import plot_cell_dynamics, plot_observables

        result.files.append(plot_cell_dynamics(done, directory / "cells.png", config.name))
        if config.kind is Scenario.COOLING or config.model is not Model.EFFECTIVE:
            result.files.append(plot_observables(done, directory / "observables.png", config.name))


def _flux_sense(config, directory, meta, threads, figures, result) -> None:
    phis = config.flux.grid()
    t = config.time.grid()
    variants = {"real": (config.params, config.model)}
    if config.ideal_reference:
        ideal = config.params.replace(j2_mode=Uniform(_mean_j2(config.params)), kappa=0.0)
        variants["ideal"] = (ideal, Model.EFFECTIVE)
    spec = config.initial_states[0]
    worst = 0.0
    for name, (params, model) in variants.items():
        runs = [_Run(f"{name}_{i}", params.replace(phi=float(p)), model, spec, config.jumps) for i, p in enumerate(phis)]
        finals = _map(_final_sweep_point, [(r, t, config.tol) for r in runs], threads)
        n_bar = np.array([f[0] for f in finals])
        worst = max(worst, max(f[1] for f in finals))
        sweep = SweepResult(phis, n_bar, finite_difference(n_bar, phis, config.flux.periodic))
        result.sweeps[name] = sweep
        result.files.append(emit_plotdata(sweep, directory / f"sweep_{name}.csv", meta))
        result.summary[f"n_bar_minus_half_pi_{name}"] = float(np.interp(-math.pi / 2, phis, n_bar))
        result.summary[f"n_bar_plus_half_pi_{name}"] = float(np.interp(math.pi / 2, phis, n_bar))
        result.summary[f"phi_max_slope_{name}"] = float(phis[np.argmax(np.abs(sweep.derivative))])
    result.top_cell = worst
    if figures:
        from .plotting import plot_sweeps

        result.files.append(plot_sweeps(result.sweeps, directory / "sweep.png", config.name))


def _effective_gamma(params: ChainParams, config: ScenarioConfig) -> float:
    return params.adiabatic_gamma if config.gamma_from_pump else params.gamma


def _imperfection_ladder(config, directory, meta, threads, figures, result) -> None:
    p = config.params
    spec = config.initial_states[0]
    panel_b = p.replace(branching=(0.0, 2.0 / 3.0, 1.0 / 3.0), kappa=0.0)
    reservoir = (JumpFamily.DECAY_TO_RESERVOIR,)
    runs = [
        _Run("a_effective", p, Model.EFFECTIVE, spec, None),
        _Run("b_lindblad_reservoir", panel_b, Model.LINDBLAD, spec, reservoir),
        _Run("b_reference_effective", p.replace(gamma=_effective_gamma(panel_b, config)), Model.EFFECTIVE, spec, None),
        _Run("c_lindblad_decays", p, Model.LINDBLAD, spec, (JumpFamily.DECAY_TO_C,) + reservoir),
        _Run("d_lindblad_all", p, Model.LINDBLAD, spec, None),
    ]
    t = config.time.grid()
    trajs = _map(_execute, [(r, t, config.tol) for r in runs], threads)
    done = {r.label: tr for r, tr in zip(runs, trajs)}
    _write_runs(done, directory, meta, result)
    diff_b = trajectory_diff(done["b_lindblad_reservoir"], done["b_reference_effective"])
    diff_a = trajectory_diff(done["b_lindblad_reservoir"], done["a_effective"])
    result.files.append(write_diff_table(diff_b, directory / "diff_b_vs_reference.csv", meta))
    result.files.append(write_diff_table(diff_a, directory / "diff_b_vs_a.csv", meta))
    result.summary["max_diff_b_vs_reference"] = diff_b.max_abs
    result.summary["max_diff_b_vs_a"] = diff_a.max_abs
    for label, traj in done.items():
        result.summary[f"n_bar_final_{label}"] = float(traj.mean_phonon[-1])
    if figures:
        from .plotting import plot_cell_dynamics

        result.files.append(plot_cell_dynamics(done, directory / "cells.png", config.name))


def _error_estimate(config, directory, meta, threads, figures, result) -> None:
    p = config.params
    spec = config.initial_states[0]
    runs = [
        _Run("hybrid", p.replace(gamma=_effective_gamma(p, config)), Model.HYBRID, spec, None),
        _Run("lindblad", p, Model.LINDBLAD, spec, None),
    ]
    t = config.time.grid()
    trajs = _map(_execute, [(r, t, config.tol) for r in runs], threads)
    done = {r.label: tr for r, tr in zip(runs, trajs)}
    _write_runs(done, directory, meta, result)
    diff = trajectory_diff(done["hybrid"], done["lindblad"])
    result.files.append(write_diff_table(diff, directory / "diff.csv", meta))
    result.summary["max_abs_diff"] = diff.max_abs
    result.summary["max_abs_n_bar_diff"] = float(np.max(np.abs(done["hybrid"].mean_phonon - done["lindblad"].mean_phonon)))
    if figures:
        from .plotting import plot_difference

        result.files.append(plot_difference(diff, directory / "diff.png", config.name))


_PIPELINES = {
    Scenario.EIGEN: _eigen,
    Scenario.BULK_DYNAMICS: _dynamics,
    Scenario.BOUNDARY_DYNAMICS: _dynamics,
    Scenario.BLOCH_COMPETITION: _dynamics,
    Scenario.COOLING: _dynamics,
    Scenario.CUSTOM: _dynamics,
    Scenario.FLUX_SENSE: _flux_sense,
    Scenario.IMPERFECTION_LADDER: _imperfection_ladder,
    Scenario.ERROR_ESTIMATE: _error_estimate,
}
