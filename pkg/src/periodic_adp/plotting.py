"""Figures for the report path; rendered off-screen to files."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_gain_comparison(ts, kbar, kstar, path, m=3, n=6, hat=None, title=None):
    """Grid of the gain entries: learned schedule, optimal gain and, if given,
    the raw samples ``hat = (s_k, vecK_k)`` from the backward solve.

    Entries are in vec (column-major) order, matching the CSV output.
    """
    fig, axes = plt.subplots(m, n, figsize=(2.2 * n, 1.8 * m), sharex=True)
    axes = np.atleast_2d(axes)
    for col in range(n):
        for row in range(m):
            idx = col * m + row
            ax = axes[row, col]
            ax.plot(ts, kstar[:, idx], "k--", lw=1.0, label="optimal")
            ax.plot(ts, kbar[:, idx], "C0-", lw=1.0, label="learned")
            if hat is not None:
                ax.plot(hat[0], hat[1][:, idx], "C3.", ms=2, label="samples")
            ax.set_title(f"K[{row + 1},{col + 1}]", fontsize=8)
            ax.tick_params(labelsize=6)
    axes[0, 0].legend(fontsize=6, loc="best")
    for ax in axes[-1]:
        ax.set_xlabel("t", fontsize=7)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_coefficient_norms(s, norms, path, period=None):
    """Norm of the coefficient trajectory against algorithmic time."""
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.semilogy(s, np.maximum(norms, 1e-300), "C0-", lw=1.0)
    if period is not None:
        for k in range(int(s[-1] // period) + 1):
            ax.axvline(k * period, color="0.85", lw=0.6, zorder=0)
    ax.set_xlabel("s")
    ax.set_ylabel("|W(s)|")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_periodic_gap(horizons, gaps, path):
    """Convergence of the backward Riccati sweep, one point per extra period."""
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.semilogy(horizons, gaps, "o-", ms=3)
    ax.set_xlabel("horizon")
    ax.set_ylabel("period-to-period gap")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
