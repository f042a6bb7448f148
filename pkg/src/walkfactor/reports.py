"""Figure rendering for CLI reports.

All figures are written straight to files with the Agg backend, so the CLI
works headless. Each helper takes data already computed elsewhere and only
draws; nothing here changes numbers.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_trace_figure(path, traces, labels=None) -> None:
    """Convergence curves (squared sine distance vs update count), log scale.

    traces is a list of AngleTrace objects; labels, when given, name each
    curve in the legend.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for idx, trace in enumerate(traces):
        label = labels[idx] if labels else None
        ax.semilogy(trace.times, np.maximum(trace.values, 1e-300), label=label)
    ax.set_xlabel("updates")
    ax.set_ylabel("squared sine distance")
    ax.grid(True, which="both", alpha=0.3)
    if labels:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_plateau_figure(path, etas, plateaus) -> None:
    """Plateau level vs step size on log-log axes, with a linear reference."""
    etas = np.asarray(etas, dtype=float)
    plateaus = np.asarray(plateaus, dtype=float)
    order = np.argsort(etas)
    etas, plateaus = etas[order], plateaus[order]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(etas, plateaus, "o-", label="measured plateau")
    scale = plateaus[-1] / etas[-1]
    ax.loglog(etas, scale * etas, "--", color="gray",
              label="linear in step size")
    ax.set_xlabel("step size")
    ax.set_ylabel("plateau (squared sine distance)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_boost_figure(path, distances, chosen: int) -> None:
    """Distance of each trial's projector to the geometric median."""
    distances = np.asarray(distances, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    idx = np.arange(distances.size)
    colors = ["tab:orange" if t == chosen else "tab:blue" for t in idx]
    ax.bar(idx, distances, color=colors)
    ax.set_xlabel("trial")
    ax.set_ylabel("distance to median projector")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_spectrum_figure(path, sigma, r: int) -> None:
    """Singular values with the retained rank marked."""
    sigma = np.asarray(sigma, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(np.arange(1, sigma.size + 1), sigma, "o-")
    ax.axvline(r + 0.5, color="gray", linestyle="--", alpha=0.7)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
