"""Figure rendering for the command-line report path.

All functions take already-computed log/series data and write a PNG next to
the delimited output.  The Agg backend is forced so rendering works headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import SimLog, TrajectorySpec, _path_samples


def save_contour_plot(path, t: np.ndarray, series: dict[str, np.ndarray]) -> None:
    """Ground-truth contour error vs time, one curve per controller."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, values in series.items():
        n = min(len(t), len(values))
        ax.plot(t[:n], 1e3 * values[:n], label=name, linewidth=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("contour error [mm]")
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_plot(path, logs: dict[str, SimLog], spec: TrajectorySpec) -> None:
    """End-effector paths against the desired path in the task plane."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ref = _path_samples(spec, 720)
    ax.plot(ref[:, 0], ref[:, 1], "k--", linewidth=1.0, label="desired")
    for name, log in logs.items():
        if len(log):
            ax.plot(log.p[:, 0], log.p[:, 1], label=name, linewidth=1.0)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_torque_plot(path, logs: dict[str, SimLog], limits=None) -> None:
    """Applied joint torques vs time, one subplot per joint."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for joint, ax in enumerate(axes):
        for name, log in logs.items():
            if len(log):
                ax.plot(log.t, log.tau[:, joint], label=name, linewidth=0.8)
        if limits is not None:
            bound = float(limits.tau_max[joint])
            ax.axhline(bound, color="r", linestyle=":", linewidth=0.8)
            ax.axhline(-bound, color="r", linestyle=":", linewidth=0.8)
        ax.set_ylabel(f"tau{joint + 1} [N m]")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="upper right", fontsize="small")
    axes[1].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
