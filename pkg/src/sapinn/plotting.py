"""Static figures. Every image is written next to a CSV holding exactly the
numbers that were drawn; the CSV is the record, the image is derived."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402

KINDS = ("solution-heatmap", "snapshot-slices", "residual-map", "abs-error-map", "mask-scatter")


def _sidecar(path, header, rows):
    path = Path(path).with_suffix(".csv")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in row) + "\n")
    return path


def _grid_rows(a0, a1, values):
    A, B = np.meshgrid(a0, a1, indexing="ij")
    return zip(A.ravel(), B.ravel(), np.asarray(values).ravel())


def _heatmap(path, a0, a1, values, axes, label, title, cmap="viridis"):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    # time (or y) runs along the horizontal axis, as in the usual PINN figures
    mesh = ax.pcolormesh(a1, a0, values, shading="auto", cmap=cmap)
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(axes[1])
    ax.set_ylabel(axes[0])
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return _sidecar(path, [axes[0], axes[1], label], _grid_rows(a0, a1, values))


def solution_heatmap(path, grid, values, title="u"):
    return _heatmap(path, *grid.coords, values, grid.axes, "u", title)


def abs_error_map(path, grid, values):
    err = np.abs(np.asarray(values) - grid.values)
    return _heatmap(path, *grid.coords, err, grid.axes, "abs_error", "|u - U|", cmap="magma")


def residual_map(path, a0, a1, residual, axes=("x", "t")):
    return _heatmap(path, a0, a1, residual, axes, "residual", "r", cmap="coolwarm")


def snapshot_slices(path, grid, values, times=(0.0, 0.5, 1.0)):
    """Prediction against the reference at the grid columns nearest ``times``."""
    a0, a1 = grid.coords
    cols = []
    for t in times:
        j = int(np.argmin(np.abs(a1 - t)))
        if abs(a1[j] - t) > 0.5 * (a1[1] - a1[0]) + 1e-12:
            raise DomainError(f"{grid.axes[1]}={t} lies outside the reference grid")
        cols.append(j)
    fig, axs = plt.subplots(1, len(cols), figsize=(4 * len(cols), 3.2), sharey=True)
    axs = np.atleast_1d(axs)
    rows = []
    for ax, j in zip(axs, cols):
        ax.plot(a0, grid.values[:, j], "b-", lw=2, label="reference")
        ax.plot(a0, values[:, j], "r--", lw=2, label="prediction")
        ax.set_title(f"{grid.axes[1]} = {a1[j]:.3g}")
        ax.set_xlabel(grid.axes[0])
        rows.extend((x, a1[j], u, U) for x, u, U in zip(a0, values[:, j], grid.values[:, j]))
    axs[0].set_ylabel("u")
    axs[0].legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return _sidecar(path, [grid.axes[0], grid.axes[1], "u", "U"], rows)


def mask_scatter(path, rows, group="r", axes=("x", "t")):
    """Scatter of one mask group; color and marker area grow with the weight.

    ``rows`` are ``(a, b, group, lambda)`` tuples as produced by the mask
    export.
    """
    sel = [r for r in rows if r[2] == group]
    if not sel:
        raise DomainError(f"mask export has no entries for group {group!r}")
    a = np.array([r[0] for r in sel])
    b = np.array([r[1] for r in sel])
    lam = np.array([r[3] for r in sel])
    span = lam.max() - lam.min()
    size = 4.0 + (16.0 * (lam - lam.min()) / span if span > 0 else np.zeros_like(lam))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    pts = ax.scatter(b, a, c=lam, s=size, cmap="viridis", vmin=lam.min(),
                     vmax=lam.max() if span > 0 else lam.min() + 1.0)
    fig.colorbar(pts, ax=ax, label=f"lambda_{group}")
    ax.set_xlabel(axes[1])
    ax.set_ylabel(axes[0])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return _sidecar(path, [axes[0], axes[1], "lambda", "size"], zip(a, b, lam, size))
