"""Delimited-text and legacy VTK writers for meshes, solutions, and reports.

Every writer goes through an atomic temp-file-plus-rename so a failed run
never leaves a partial file behind.  Floats are printed with 17 significant
digits, which round-trips IEEE doubles exactly and makes reruns
byte-identical.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fem import FemSolution
from .field import ConvergenceRecord, FieldReport, b_field
from .geometry import PrefractalBoundary
from .mesh import TriMesh

__all__ = [
    "atomic_write_text",
    "atomic_write_bytes",
    "write_boundary_csv",
    "write_summary_csv",
    "write_mesh_csv",
    "write_solution_csv",
    "write_report_csv",
    "write_table_csv",
    "write_convergence_csv",
    "write_mosco_csv",
    "write_vtk",
]

REPORT_HEADER = ("domain,n,h,num_vertices,num_triangles,linf_B,ell_n,"
                 "l2_u,h1_semi_u,cg_iters")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    """Write data to path via a same-directory temp file and rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return target


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_boundary_csv(path: str | os.PathLike,
                       boundary: PrefractalBoundary) -> Path:
    mask = np.zeros(len(boundary.vertices), dtype=bool)
    mask[boundary.reentrant] = True
    lines = ["index,x1,x2,reentrant"]
    for i, ((x, y), r) in enumerate(zip(boundary.vertices, mask)):
        lines.append(f"{i},{_fmt(x)},{_fmt(y)},{int(r)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_summary_csv(path: str | os.PathLike,
                      pairs: Sequence[tuple[str, object]]) -> Path:
    """Key-value summary table; values formatted per type."""
    lines = ["key,value"]
    for key, value in pairs:
        if isinstance(value, bool):
            text = str(int(value))
        elif isinstance(value, float):
            text = _fmt(value)
        else:
            text = str(value)
        lines.append(f"{key},{text}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_mesh_csv(out_dir: str | os.PathLike, mesh: TriMesh) -> tuple[Path, Path]:
    """Write vertices.csv and triangles.csv under out_dir."""
    out = Path(out_dir)
    vlines = ["vertex,x1,x2,on_boundary"]
    for i, ((x, y), flag) in enumerate(zip(mesh.vertices, mesh.boundary_vertex)):
        vlines.append(f"{i},{_fmt(x)},{_fmt(y)},{int(flag)}")
    tlines = ["triangle,v0,v1,v2"]
    for t, (a, b, c) in enumerate(mesh.triangles):
        tlines.append(f"{t},{a},{b},{c}")
    return (atomic_write_text(out / "vertices.csv", "\n".join(vlines) + "\n"),
            atomic_write_text(out / "triangles.csv", "\n".join(tlines) + "\n"))


def write_solution_csv(path: str | os.PathLike, sol: FemSolution) -> Path:
    lines = ["vertex,u"]
    for i, value in enumerate(sol.u):
        lines.append(f"{i},{_fmt(value)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def _report_row(rep: FieldReport) -> str:
    return ",".join([
        rep.domain, str(rep.level), _fmt(rep.h), str(rep.num_vertices),
        str(rep.num_triangles), _fmt(rep.linf_b), _fmt(rep.ell),
        _fmt(rep.l2_u), _fmt(rep.h1_semi_u), str(rep.cg_iterations),
    ])


def write_report_csv(path: str | os.PathLike,
                     reports: Iterable[FieldReport]) -> Path:
    lines = [REPORT_HEADER]
    lines.extend(_report_row(r) for r in reports)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_table_csv(path: str | os.PathLike, reports: Sequence[FieldReport],
                    reference: Sequence[float | None]) -> Path:
    """Field-peak table with relative deviation from reference values."""
    lines = ["domain,linf_B,ell_n,rel_dev_reference"]
    for rep, ref in zip(reports, reference):
        dev = "" if ref is None else _fmt((rep.linf_b - ref) / ref)
        lines.append(f"{rep.domain},{_fmt(rep.linf_b)},{_fmt(rep.ell)},{dev}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_convergence_csv(path: str | os.PathLike,
                          rec: ConvergenceRecord) -> Path:
    lines = ["level,h,err_h1,err_l2"]
    for level, (h, e1, e2) in enumerate(zip(rec.h, rec.err_h1, rec.err_l2)):
        lines.append(f"{level},{_fmt(h)},{_fmt(e1)},{_fmt(e2)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_mosco_csv(path: str | os.PathLike, levels: Sequence[int],
                    distances: Sequence[float]) -> Path:
    lines = ["n,l2_diff"]
    for n, d in zip(levels, distances):
        lines.append(f"{n},{_fmt(d)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_vtk(path: str | os.PathLike, sol: FemSolution,
              title: str = "kochfem solution") -> Path:
    """Legacy ASCII VTK unstructured grid: nodal u, per-cell B and |B|."""
    mesh = sol.mesh
    b = b_field(sol)
    bmag = np.hypot(b[:, 0], b[:, 1])
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    m = mesh.num_triangles
    lines.append(f"CELLS {m} {4 * m}")
    for a, bb, c in mesh.triangles:
        lines.append(f"3 {a} {bb} {c}")
    lines.append(f"CELL_TYPES {m}")
    lines.extend(["5"] * m)
    lines.append(f"POINT_DATA {mesh.num_vertices}")
    lines.append("SCALARS u double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in sol.u)
    lines.append(f"CELL_DATA {m}")
    lines.append("SCALARS b_magnitude double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in bmag)
    lines.append("VECTORS b double")
    lines.extend(f"{_fmt(bx)} {_fmt(by)} 0" for bx, by in b)
    return atomic_write_text(path, "\n".join(lines) + "\n")
