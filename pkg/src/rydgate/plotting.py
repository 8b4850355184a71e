"""Optional PNG figures next to the CSV output (``--plot``)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# states below this peak population are left out of trajectory plots
MIN_PEAK = 1e-3


def plot_trajectory(times, populations, labels, dark, path) -> None:
    pops = np.asarray(populations)
    t_us = np.asarray(times) * 1e6
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, lab in enumerate(labels):
        if pops[:, k].max() >= MIN_PEAK:
            ax.plot(t_us, pops[:, k], label=lab)
    ax.plot(t_us, dark, "k--", lw=1, label="dark")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(xs, values, xlabel, ylabel, path, log: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, values, "o-")
    if log:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
