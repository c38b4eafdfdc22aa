"""Report figures, rendered off-screen to PNG files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .intertwine import box_grid, curvature_matrix, smallest_eigenvalue  # noqa: E402


def _robust_range(values):
    """Color/axis limits ignoring the top 1% (caps near singular points)."""
    v = np.asarray(values)[np.isfinite(values)]
    return float(v.min()), float(np.percentile(v, 99))


def plot_spectrum(eigenvalues, bounds, path, d):
    """Oracle eigenvalues as markers, applicable lower bounds as horizontal lines."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ev = np.asarray(eigenvalues)
    ax.plot(np.arange(len(ev)), ev, "o", color="k", label="oracle")
    styles = {"lambda_1": ("tab:blue", 1), "lambda_d_plus_1": ("tab:red", d + 1)}
    for b in bounds:
        if b.get("value") is None or b["target"] not in styles:
            continue
        color, k = styles[b["target"]]
        ax.hlines(b["value"], k - 0.35, k + 0.35, colors=color, linestyles="--")
        ax.annotate(b["method"], (k + 0.38, b["value"]), fontsize=7, va="center", color=color)
    ax.set_xlabel("index k")
    ax.set_ylabel(r"$\lambda_k$")
    ax.set_xlim(-0.5, max(len(ev), d + 2) + 1.5)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curvature(V, W, box, path, n=None):
    """Smallest eigenvalue of the curvature matrix: a curve for d=1, a heatmap of the (x1, x2) slice for d>=2."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if V.dim == 1:
        x, _ = box_grid(1, box, n or 800)
        rho = smallest_eigenvalue(curvature_matrix(V, W, x))
        ax.plot(x[:, 0], rho, color="k", lw=1.2)
        lo, hi = _robust_range(rho)
        ax.set_ylim(lo - 0.05 * (hi - lo + 1e-12), hi + 0.05 * (hi - lo + 1e-12))
        ax.set_xlabel("x")
        ax.set_ylabel(r"$\rho$")
    else:
        n = n or 120  # even, so the singular origin of power components is not sampled
        axis = np.linspace(-box, box, n)
        X1, X2 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.zeros((n * n, V.dim))
        pts[:, 0], pts[:, 1] = X1.ravel(), X2.ravel()
        rho = smallest_eigenvalue(curvature_matrix(V, W, pts)).reshape(n, n)
        mesh = ax.pcolormesh(X1, X2, rho, shading="auto", cmap="viridis",
                             vmin=_robust_range(rho)[0], vmax=_robust_range(rho)[1])
        fig.colorbar(mesh, ax=ax, label=r"$\rho$")
        ax.set_xlabel(r"$x_1$")
        ax.set_ylabel(r"$x_2$")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
