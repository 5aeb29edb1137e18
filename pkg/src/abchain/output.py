"""Deterministic CSV writers.

Every file starts with ``#`` metadata lines (schema version, package version,
scenario name, config hash) followed by a header row.  Floats are written
with a fixed ``.12g`` format so that identical inputs give byte-identical
files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dynamics import Trajectory
from .observables import SweepResult, TrajectoryDiff

__all__ = [
    "SCHEMA_VERSION",
    "OutputError",
    "format_value",
    "write_csv",
    "emit_plotdata",
    "write_cell_table",
    "write_diff_table",
    "write_eigen_tables",
]

SCHEMA_VERSION = 1
TRAJECTORY_SERIES = ("n_bar", "fluctuation", "entropy", "norm")
SWEEP_SERIES = ("n_bar", "derivative")


class OutputError(OSError):
    """Writing an output file failed; the message carries the path."""


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    v = float(x)
    if v == 0.0:
        # fold -0.0 into 0
        return "0"
    return format(v, ".12g")


def _header(meta: Mapping[str, str] | None) -> list[str]:
    from . import __version__

    lines = [f"# abchain {__version__} csv-schema {SCHEMA_VERSION}"]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    meta: Mapping[str, str] | None = None,
) -> Path:
    """Write ``rows`` under a ``#`` metadata block and a header row."""
    path = Path(path)
    buf = io.StringIO()
    buf.write("\n".join(_header(meta)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_plotdata(
    result: Trajectory | SweepResult,
    path: str | Path,
    meta: Mapping[str, str] | None = None,
) -> Path:
    """Long-format ``(x, series, value)`` table of a trajectory or a flux sweep.

    Trajectories give ``time_ms`` rows for ``n_bar``, ``fluctuation``,
    ``entropy`` and ``norm`` (norm squared or trace); sweeps give ``phi_rad``
    rows for ``n_bar`` and ``derivative``.
    """
    if isinstance(result, SweepResult):
        x = np.asarray(result.phi_grid)
        series = {"n_bar": result.n_bar_final, "derivative": result.derivative}
        columns = ("phi_rad", "series", "value")
    elif isinstance(result, Trajectory):
        x = np.asarray(result.times)
        columns = ("time_ms", "series", "value")
        if len(result) == 0:
            return write_csv(path, columns, [], meta)
        series = {
            "n_bar": result.mean_phonon,
            "fluctuation": result.fluctuation,
            "entropy": result.entropy,
            "norm": result.trace,
        }
    else:
        raise TypeError(f"cannot emit plot data for {type(result).__name__}")
    rows = ((x[i], name, values[i]) for name, values in series.items() for i in range(x.size))
    return write_csv(path, columns, rows, meta)


def write_cell_table(traj: Trajectory, path: str | Path, meta: Mapping[str, str] | None = None) -> Path:
    """Wide table of normalized cell populations, one row per time."""
    cols = ["time_ms"] + [f"p_{n}" for n in range(traj.n_cells)]
    if len(traj) == 0:
        return write_csv(path, cols, [], meta)
    pops = traj.cell_populations
    rows = ([t, *p] for t, p in zip(traj.times, pops))
    return write_csv(path, cols, rows, meta)


def write_diff_table(diff: TrajectoryDiff, path: str | Path, meta: Mapping[str, str] | None = None) -> Path:
    cols = ["time_ms"] + [f"d_{n}" for n in range(diff.per_cell.shape[1])]
    rows = ([t, *d] for t, d in zip(diff.times, diff.per_cell))
    return write_csv(path, cols, rows, meta)


def write_eigen_tables(
    eigenvalues: np.ndarray,
    weights: np.ndarray,
    directory: str | Path,
    meta: Mapping[str, str] | None = None,
    prefix: str = "",
) -> tuple[Path, Path]:
    """Eigenvalue list with centres of mass, and the per-cell localization table."""
    directory = Path(directory)
    cells = np.arange(weights.shape[1])
    mean_cell = weights @ cells
    ev_path = write_csv(
        directory / f"{prefix}eigenvalues.csv",
        ("eigen_index", "re_lambda", "im_lambda", "mean_cell"),
        ((i, lam.real, lam.imag, mean_cell[i]) for i, lam in enumerate(eigenvalues)),
        meta,
    )
    loc_path = write_csv(
        directory / f"{prefix}localization.csv",
        ["eigen_index", "re_lambda", "im_lambda"] + [f"w_{n}" for n in cells],
        ([i, lam.real, lam.imag, *weights[i]] for i, lam in enumerate(eigenvalues)),
        meta,
    )
    return ev_path, loc_path
