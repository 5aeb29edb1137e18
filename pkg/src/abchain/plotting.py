"""Matplotlib renderings of scenario results, written as PNG files."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dynamics import Trajectory  # noqa: E402
from .observables import SweepResult, TrajectoryDiff  # noqa: E402

__all__ = [
    "figure_style",
    "plot_spectrum",
    "plot_cell_dynamics",
    "plot_observables",
    "plot_sweeps",
    "plot_difference",
]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "lines.linewidth": 1.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "image.cmap": "viridis",
}


@contextmanager
def figure_style():
    with plt.rc_context(STYLE):
        yield


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders free of timestamps
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_spectrum(eigenvalues: np.ndarray, weights: np.ndarray, path: str | Path, title: str = "") -> Path:
    """Per-cell weight of every eigenstate (rows sorted by Re lambda)."""
    with figure_style():
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(7.0, 3.0), gridspec_kw={"width_ratios": [3, 2]})
        im = ax0.imshow(weights.T, origin="lower", aspect="auto", interpolation="nearest", vmin=0)
        ax0.set_xlabel("eigenstate index")
        ax0.set_ylabel("cell n")
        fig.colorbar(im, ax=ax0, label="probability")
        ax1.plot(eigenvalues.real, eigenvalues.imag, "o", ms=3)
        ax1.set_xlabel(r"Re $\lambda$ (rad/ms)")
        ax1.set_ylabel(r"Im $\lambda$ (rad/ms)")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_cell_dynamics(runs: Mapping[str, Trajectory], path: str | Path, title: str = "") -> Path:
    """Cell-population heat maps with the mean phonon number overlaid."""
    with figure_style():
        k = len(runs)
        fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 2.8), squeeze=False, sharey=True)
        for ax, (label, traj) in zip(axes[0], runs.items()):
            extent = (traj.times[0], traj.times[-1], -0.5, traj.n_cells - 0.5)
            ax.imshow(traj.cell_populations.T, origin="lower", aspect="auto", extent=extent, vmin=0, vmax=1)
            ax.plot(traj.times, traj.mean_phonon, color="tab:red")
            ax.set_xlabel("t (ms)")
            ax.set_title(label)
        axes[0][0].set_ylabel("cell n")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_observables(runs: Mapping[str, Trajectory], path: str | Path, title: str = "") -> Path:
    """Mean phonon number, its fluctuation and the entropy against time."""
    with figure_style():
        fig, axes = plt.subplots(1, 3, figsize=(8.5, 2.6))
        for label, traj in runs.items():
            axes[0].plot(traj.times, traj.mean_phonon, label=label)
            axes[1].plot(traj.times, traj.fluctuation)
            axes[2].plot(traj.times, traj.entropy)
        for ax, name in zip(axes, (r"$\bar n$", r"$\Delta n$", "S (nats)")):
            ax.set_xlabel("t (ms)")
            ax.set_ylabel(name)
        axes[0].legend(frameon=False)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_sweeps(sweeps: Mapping[str, SweepResult], path: str | Path, title: str = "") -> Path:
    with figure_style():
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(3.6, 4.4), sharex=True)
        for label, res in sweeps.items():
            ax0.plot(res.phi_grid, res.n_bar_final, label=label)
            ax1.plot(res.phi_grid, res.derivative)
        ax0.set_ylabel(r"final $\bar n$")
        ax1.set_ylabel(r"d$\bar n$/d$\phi$")
        ax1.set_xlabel(r"$\phi$ (rad)")
        ax0.legend(frameon=False)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_difference(diff: TrajectoryDiff, path: str | Path, title: str = "") -> Path:
    with figure_style():
        fig, ax = plt.subplots(figsize=(3.8, 2.8))
        n = diff.per_cell.shape[1]
        lim = max(float(np.max(np.abs(diff.per_cell), initial=0.0)), 1e-12)
        extent = (diff.times[0], diff.times[-1], -0.5, n - 0.5)
        im = ax.imshow(diff.per_cell.T, origin="lower", aspect="auto", extent=extent,
                       cmap="RdBu_r", vmin=-lim, vmax=lim)
        fig.colorbar(im, ax=ax, label="population difference")
        ax.set_xlabel("t (ms)")
        ax.set_ylabel("cell n")
        if title:
            ax.set_title(title)
        return _save(fig, path)
