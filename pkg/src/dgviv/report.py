"""Figure rendering for the CLI report paths.

Every CLI subcommand that writes delimited output also renders the
corresponding matplotlib figure next to it; this module owns those plots.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_convergence(rows, path):
    """rows: iterable of (p, h, L2, Linf) tuples."""
    rows = sorted(rows)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for p in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == p]
        h = np.array([r[1] for r in sel])
        l2 = np.array([r[2] for r in sel])
        ax.loglog(h, l2, "o-", label=f"p={p}")
        ax.loglog(h, l2[0] * (h / h[0]) ** (p + 1), "k--", lw=0.7)
    ax.set_xlabel("h")
    ax.set_ylabel(r"$L_2$ error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_series(series, path):
    """series: rows of (t, CL, CD, y, ydot, dt)."""
    series = np.asarray(series)
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    axes[0].plot(series[:, 0], series[:, 1], lw=0.8)
    axes[0].set_ylabel(r"$C_L$")
    axes[1].plot(series[:, 0], series[:, 2], lw=0.8, color="tab:orange")
    axes[1].set_ylabel(r"$C_D$")
    axes[2].plot(series[:, 0], series[:, 3], lw=0.8, color="tab:green")
    axes[2].set_ylabel("y")
    axes[2].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spectrum(freq, mag, path, peaks=()):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(freq, mag, lw=0.9)
    for f, m in peaks:
        ax.plot([f], [m], "rv")
        ax.annotate(f"{f:.4g} Hz", (f, m), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("f [Hz]")
    ax.set_ylabel("|A|")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_face_values(values, path, ylabel):
    """Sorted per-face (or per-element) scalar, e.g. sigma_e or Lambda_K."""
    values = np.sort(np.asarray(values))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.maximum(values, np.finfo(float).tiny), lw=0.9)
    ax.set_xlabel("rank")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
