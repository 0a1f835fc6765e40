"""Matplotlib renderings written next to the delimited reports.

All figures use the Agg backend and a pinned PNG metadata block, so a rerun
with the same inputs produces byte-identical image files.
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .export import atomic_write_bytes
from .fem import FemSolution
from .field import ConvergenceRecord, b_field
from .geometry import PrefractalBoundary
from .mesh import TriMesh

__all__ = [
    "save_figure",
    "plot_boundary",
    "plot_mesh",
    "plot_field",
    "plot_table",
    "plot_convergence",
    "plot_mosco",
]

_PNG_META = {"Software": "kochfem"}


def save_figure(fig, path: str | os.PathLike, dpi: int = 150) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=dpi, metadata=_PNG_META,
                bbox_inches="tight")
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def _draw_outline(ax, boundary: PrefractalBoundary) -> None:
    closed = np.vstack([boundary.vertices, boundary.vertices[:1]])
    ax.plot(closed[:, 0], closed[:, 1], color="black", linewidth=0.8)


def plot_boundary(path: str | os.PathLike,
                  boundary: PrefractalBoundary) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    _draw_outline(ax, boundary)
    if len(boundary.reentrant) > 0:
        pts = boundary.vertices[boundary.reentrant]
        ax.plot(pts[:, 0], pts[:, 1], ".", color="firebrick", markersize=2,
                label="reentrant corners")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(f"boundary, {len(boundary.vertices)} segments")
    return save_figure(fig, path)


def plot_mesh(path: str | os.PathLike, mesh: TriMesh,
              boundary: PrefractalBoundary | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles,
               linewidth=0.25, color="steelblue")
    if boundary is not None:
        _draw_outline(ax, boundary)
    ax.set_aspect("equal")
    ax.set_title(f"{mesh.num_triangles} triangles, "
                 f"min angle {mesh.min_angle_deg():.1f} deg")
    return save_figure(fig, path)


def plot_field(path: str | os.PathLike, sol: FemSolution,
               boundary: PrefractalBoundary | None = None) -> Path:
    """Per-triangle |B| heat map with the potential overlaid as contours."""
    mesh = sol.mesh
    b = b_field(sol)
    bmag = np.hypot(b[:, 0], b[:, 1])
    fig, ax = plt.subplots(figsize=(6.5, 6.0))
    im = ax.tripcolor(mesh.vertices[:, 0], mesh.vertices[:, 1],
                      mesh.triangles, facecolors=bmag, cmap="inferno")
    try:
        ax.tricontour(mesh.vertices[:, 0], mesh.vertices[:, 1],
                      mesh.triangles, sol.u, levels=8, colors="white",
                      linewidths=0.4, alpha=0.6)
    except ValueError:
        pass  # flat fields have no contour levels
    if boundary is not None:
        _draw_outline(ax, boundary)
    fig.colorbar(im, ax=ax, label="|B|")
    ax.set_aspect("equal")
    ax.set_title(f"field magnitude, peak {bmag.max():.4g}")
    return save_figure(fig, path)


def plot_table(path: str | os.PathLike, labels: Sequence[str],
               lengths: Sequence[float], values: Sequence[float],
               reference: Sequence[float | None]) -> Path:
    """Peak |B| against boundary length, with reference values overlaid."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(lengths, values, "o-", color="steelblue", label="computed")
    ref_x = [ell for ell, r in zip(lengths, reference) if r is not None]
    ref_y = [r for r in reference if r is not None]
    if ref_y:
        ax.plot(ref_x, ref_y, "s--", color="dimgray", label="reference")
    for ell, value, label in zip(lengths, values, labels):
        ax.annotate(label, (ell, value), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("boundary length")
    ax.set_ylabel("peak |B|")
    ax.legend()
    ax.grid(alpha=0.3)
    return save_figure(fig, path)


def plot_convergence(path: str | os.PathLike, rec: ConvergenceRecord) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.loglog(rec.h, rec.err_h1, "o-", color="steelblue",
              label=f"H1 seminorm (order {rec.order_h1:.2f})")
    ax.loglog(rec.h, rec.err_l2, "s-", color="firebrick",
              label=f"L2 (order {rec.order_l2:.2f})")
    anchor = rec.err_h1[0] / rec.h[0]
    ax.loglog(rec.h, anchor * rec.h, ":", color="gray", label="slope 1")
    ax.loglog(rec.h, anchor * rec.h**2 / rec.h[0], ":", color="silver",
              label="slope 2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    return save_figure(fig, path)


def plot_mosco(path: str | os.PathLike, levels: Sequence[int],
               distances: Sequence[float]) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.semilogy(list(levels), list(distances), "o-", color="steelblue")
    ax.set_xticks(list(levels))
    ax.set_xlabel("level n")
    ax.set_ylabel("L2 difference to next level")
    ax.grid(alpha=0.3, which="both")
    return save_figure(fig, path)
