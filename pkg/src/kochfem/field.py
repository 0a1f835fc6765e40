"""Post-processing: induction field, norms, inter-mesh errors, rate studies.

The potential's rotated gradient is the induction B = (du/dx2, -du/dx1),
constant on each triangle for piecewise-linear elements.  Errors between
hierarchy levels are computed exactly: nesting makes coarse-to-fine
interpolation an identity on the coarse space, the gradient of a P1
difference is elementwise constant, and the squared difference integrates
exactly with the midpoint-edge (degree-2) mass matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MeshError, SolverError
from .fem import (
    FemSolution,
    QUAD_BARY,
    QUAD_WEIGHTS,
    SourceField,
    assemble,
    base_mesh_for,
    cg_solve,
    solve_problem,
)
from .geometry import TRIANGLE_CENTROID, DomainSpec, boundary_length
from .mesh import GradingParams, TriMesh, refine_to_size, uniform_refine

__all__ = [
    "FieldReport",
    "ConvergenceRecord",
    "LinfB",
    "element_gradients",
    "element_gradient",
    "b_field",
    "linf_b",
    "solution_norms",
    "prolong",
    "h1_l2_error",
    "observed_order",
    "convergence_study",
    "mosco_proxy",
    "l2_domain_distance",
    "build_report",
]


def element_gradients(sol: FemSolution) -> np.ndarray:
    """Per-triangle constant gradient of the nodal field, shape (m, 2)."""
    mesh = sol.mesh
    c = mesh.tri_coords()
    e = np.empty_like(c)
    for i in range(3):
        e[:, i] = c[:, (i + 2) % 3] - c[:, (i + 1) % 3]
    # grad phi_i = rotate90(e_i) / (2 area), with e_i the edge opposite i
    rot = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    uv = sol.u[mesh.triangles]
    return np.einsum("ti,tid->td", uv, rot) / (2.0 * mesh.areas())[:, None]


def element_gradient(sol: FemSolution, t: int) -> tuple[float, float]:
    """Gradient on one triangle (see element_gradients)."""
    g = element_gradients(sol)[t]
    return float(g[0]), float(g[1])


def b_field(sol: FemSolution) -> np.ndarray:
    """Induction per triangle: B = (du/dx2, -du/dx1); the third component
    vanishes identically and is not stored."""
    g = element_gradients(sol)
    return np.column_stack([g[:, 1], -g[:, 0]])


class LinfB(NamedTuple):
    """Largest elementwise |B| and the triangle attaining it."""

    value: float
    triangle: int


def linf_b(sol: FemSolution) -> LinfB:
    """Max over triangles of |B| (equivalently |grad u|, exactly)."""
    b = b_field(sol)
    norms = np.hypot(b[:, 0], b[:, 1])
    t = int(np.argmax(norms))
    return LinfB(value=float(norms[t]), triangle=t)


def solution_norms(sol: FemSolution) -> tuple[float, float]:
    """(L2 norm, H1 seminorm) of the piecewise-linear field, both exact."""
    mesh = sol.mesh
    areas = mesh.areas()
    uv = sol.u[mesh.triangles]
    sq = (uv**2).sum(axis=1) + uv[:, 0] * uv[:, 1] \
        + uv[:, 0] * uv[:, 2] + uv[:, 1] * uv[:, 2]
    l2 = math.sqrt(float((areas / 6.0 * sq).sum()))
    g = element_gradients(sol)
    h1 = math.sqrt(float((areas * (g**2).sum(axis=1)).sum()))
    return l2, h1


def prolong(sol: FemSolution, fine: TriMesh) -> np.ndarray:
    """Interpolate nodal values onto a descendant mesh, exactly.

    Every vertex added during refinement is an edge midpoint whose two
    parents precede it, so values resolve wave by wave; for piecewise-linear
    data on nested meshes the midpoint average IS the interpolant.
    """
    coarse = sol.mesh
    nc = coarse.num_vertices
    if fine.num_vertices < nc or not np.array_equal(
            fine.vertices[:nc], coarse.vertices):
        raise MeshError("fine mesh does not descend from the solution's mesh")
    vals = np.empty(fine.num_vertices)
    vals[:nc] = sol.u
    vp = fine.vertex_parents
    resolved = np.zeros(fine.num_vertices, dtype=bool)
    resolved[:nc] = True
    pending = np.flatnonzero(~resolved)
    if pending.size and (vp[pending] < 0).any():
        raise MeshError("broken midpoint lineage in the fine mesh")
    while pending.size:
        ready = resolved[vp[pending, 0]] & resolved[vp[pending, 1]]
        if not ready.any():
            raise MeshError("cyclic midpoint lineage; meshes are not nested")
        idx = pending[ready]
        vals[idx] = 0.5 * (vals[vp[idx, 0]] + vals[vp[idx, 1]])
        resolved[idx] = True
        pending = pending[~ready]
    return vals


def _p1_norms(mesh: TriMesh, values: np.ndarray) -> tuple[float, float]:
    """(H1 seminorm, L2 norm) of a nodal field on mesh, both exact."""
    c = mesh.tri_coords()
    areas = mesh.areas()
    e = np.empty_like(c)
    for i in range(3):
        e[:, i] = c[:, (i + 2) % 3] - c[:, (i + 1) % 3]
    rot = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    uv = values[mesh.triangles]
    g = np.einsum("ti,tid->td", uv, rot) / (2.0 * areas)[:, None]
    h1 = math.sqrt(float((areas * (g**2).sum(axis=1)).sum()))
    sq = (uv**2).sum(axis=1) + uv[:, 0] * uv[:, 1] \
        + uv[:, 0] * uv[:, 2] + uv[:, 1] * uv[:, 2]
    l2 = math.sqrt(float((areas / 6.0 * sq).sum()))
    return h1, l2


def h1_l2_error(sol: FemSolution, reference: FemSolution) -> tuple[float, float]:
    """Exact (H1 seminorm, L2) distance to a solution on a descendant mesh."""
    diff = prolong(sol, reference.mesh) - reference.u
    return _p1_norms(reference.mesh, diff)


def observed_order(h: np.ndarray, errors: np.ndarray) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(h) < 3 or len(errors) != len(h):
        raise SolverError("observed order needs at least 3 matched data points")
    if not ((h > 0).all() and (errors > 0).all()):
        raise SolverError("observed order needs positive sizes and errors")
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


@dataclass(frozen=True)
class ConvergenceRecord:
    """Error ladder: mesh sizes (strictly decreasing) with both error norms."""

    h: np.ndarray
    err_h1: np.ndarray
    err_l2: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        e1 = np.asarray(self.err_h1, dtype=float)
        e2 = np.asarray(self.err_l2, dtype=float)
        if not (np.diff(h) < 0).all():
            raise SolverError("convergence record needs strictly decreasing h")
        if not ((e1 > 0).all() and (e2 > 0).all()):
            raise SolverError("convergence record needs positive errors")
        for name, arr in (("h", h), ("err_h1", e1), ("err_l2", e2)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def order_h1(self) -> float:
        return observed_order(self.h, self.err_h1)

    @property
    def order_l2(self) -> float:
        return observed_order(self.h, self.err_l2)


def _solve_on_mesh(mesh: TriMesh, source: SourceField, mu: float,
                   tol: float) -> FemSolution:
    system, rhs = assemble(mesh, source, mu)
    res = cg_solve(system, rhs, tol=tol)
    u = np.zeros(mesh.num_vertices)
    u[~mesh.boundary_vertex] = res.x
    return FemSolution(mesh=mesh, u=u, iterations=res.iterations,
                       relative_residual=res.relative_residual, mu=mu)


def convergence_study(spec: DomainSpec, source: SourceField,
                      g: GradingParams, levels: int = 4,
                      graded: bool = True, mu: float = 1.0,
                      tol: float = 1e-10, reference_extra: int = 2,
                      ) -> ConvergenceRecord:
    """Error ladder against a nested reference two uniform levels finer.

    Graded ladders halve the grading parameter h per level and refine each
    mesh out of the previous one, so the whole family is nested; ungraded
    ladders refine uniformly instead.  The reference mesh descends from the
    finest study mesh, which makes every error computable exactly.
    """
    if levels < 3:
        raise SolverError("a convergence study needs at least 3 levels")
    boundary = spec.boundary()
    mesh = base_mesh_for(spec)
    while not (~mesh.boundary_vertex).any():
        mesh = uniform_refine(mesh)
    ladder: list[TriMesh] = []
    sizes: list[float] = []
    for k in range(levels):
        if graded:
            gk = GradingParams(h=g.h / 2.0**k, eta=g.eta, sigma=g.sigma,
                               cutoff=g.cutoff)
            mesh = refine_to_size(mesh, boundary, gk)
            sizes.append(gk.h)
        else:
            mesh = uniform_refine(mesh) if k > 0 else mesh
            sizes.append(float(mesh.diameters().max()))
        ladder.append(mesh)

    reference = ladder[-1]
    for _ in range(reference_extra):
        reference = uniform_refine(reference)
    ref_sol = _solve_on_mesh(reference, source, mu, tol)

    err_h1 = []
    err_l2 = []
    for m in ladder:
        sol = _solve_on_mesh(m, source, mu, tol)
        e1, e2 = h1_l2_error(sol, ref_sol)
        err_h1.append(e1)
        err_l2.append(e2)
    return ConvergenceRecord(h=np.array(sizes), err_h1=np.array(err_h1),
                             err_l2=np.array(err_l2))


class _GridLocator:
    """Uniform-grid point location: cell size is the median triangle diameter,
    with an exhaustive scan as the fallback for rare hash misses."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.cell = float(np.median(mesh.diameters()))
        c = mesh.tri_coords()
        lo = c.min(axis=1)
        hi = c.max(axis=1)
        self.origin = lo.min(axis=0)
        ilo = np.floor((lo - self.origin) / self.cell).astype(np.int64)
        ihi = np.floor((hi - self.origin) / self.cell).astype(np.int64)
        buckets: dict[tuple[int, int], list[int]] = {}
        for t in range(mesh.num_triangles):
            for ix in range(ilo[t, 0], ihi[t, 0] + 1):
                for iy in range(ilo[t, 1], ihi[t, 1] + 1):
                    buckets.setdefault((ix, iy), []).append(t)
        self.buckets = buckets
        self._coords = c
        self._origins = c[:, 0]
        mat = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=-1)
        self._inv = np.linalg.inv(mat)

    def _bary_ok(self, tri_ids: np.ndarray, points: np.ndarray,
                 tol: float = 1e-9) -> np.ndarray:
        lam = np.einsum("ted,td->te", self._inv[tri_ids],
                        points - self._origins[tri_ids])
        return ((lam[:, 0] >= -tol) & (lam[:, 1] >= -tol)
                & (lam.sum(axis=1) <= 1.0 + tol))

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Containing triangle id per point; raises if any point is outside."""
        pts = np.asarray(points, dtype=float)
        if len(pts) == 0:
            return np.zeros(0, dtype=np.int64)
        out = np.full(len(pts), -1, dtype=np.int64)
        keys = np.floor((pts - self.origin) / self.cell).astype(np.int64)
        order = np.lexsort((keys[:, 1], keys[:, 0]))
        sorted_keys = keys[order]
        breaks = np.flatnonzero(
            (np.diff(sorted_keys[:, 0]) != 0) | (np.diff(sorted_keys[:, 1]) != 0))
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks + 1, [len(pts)]])
        for s, e in zip(starts, ends):
            idx = order[s:e]
            cand = self.buckets.get((int(sorted_keys[s, 0]),
                                     int(sorted_keys[s, 1])), ())
            remaining = idx
            for t in cand:
                if remaining.size == 0:
                    break
                ok = self._bary_ok(np.full(len(remaining), t), pts[remaining])
                out[remaining[ok]] = t
                remaining = remaining[~ok]
        missed = np.flatnonzero(out < 0)
        for i in missed:
            ok = self._bary_ok(np.arange(self.mesh.num_triangles),
                               np.broadcast_to(pts[i], (self.mesh.num_triangles, 2)))
            hits = np.flatnonzero(ok)
            if hits.size == 0:
                raise MeshError(
                    f"point {pts[i]} lies outside the target mesh; the coarser "
                    "domain is expected to be contained in the finer one")
            out[i] = hits[0]
        return out

    def evaluate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Piecewise-linear evaluation of a nodal field at arbitrary points."""
        pts = np.asarray(points, dtype=float)
        tri_ids = self.locate(pts)
        lam12 = np.einsum("ted,td->te", self._inv[tri_ids],
                          pts - self._origins[tri_ids])
        lam = np.column_stack([1.0 - lam12.sum(axis=1), lam12])
        return np.einsum("ti,ti->t", values[self.mesh.triangles[tri_ids]], lam)


def mosco_proxy(levels, g: GradingParams, source: SourceField | None = None,
                mu: float = 1.0, tol: float = 1e-10) -> np.ndarray:
    """L2(coarser domain) distances between solutions on successive domains.

    For each n in levels, solves on generation n and n+1 at the same grading
    parameters, samples both fields at the seven-point nodes of the coarser
    mesh (the coarser domain is contained in the finer), and integrates the
    squared difference there.  The invading-domain convergence theory says
    the sequence should shrink.
    """
    levels = sorted(int(n) for n in levels)
    if len(levels) < 3:
        raise SolverError("the domain-convergence proxy needs at least 3 levels")
    if source is None:
        source = SourceField.gaussian(TRIANGLE_CENTROID)
    needed = sorted(set(levels) | {n + 1 for n in levels})
    sols: dict[int, FemSolution] = {}
    for n in needed:
        sol, _ = solve_problem(DomainSpec(kind="snowflake", level=n),
                               source, g, mu=mu, tol=tol)
        sols[n] = sol

    return np.asarray([l2_domain_distance(sols[n], sols[n + 1])
                       for n in levels])


def l2_domain_distance(coarse: FemSolution, fine: FemSolution) -> float:
    """L2 distance over the coarse solution's domain, by quadrature sampling.

    The fine solution may live on a different (larger) domain; every sample
    point of the coarse mesh must fall inside the fine mesh.
    """
    mesh = coarse.mesh
    pts = np.einsum("qi,tid->tqd", QUAD_BARY, mesh.tri_coords())
    own = np.einsum("qi,ti->tq", QUAD_BARY, coarse.u[mesh.triangles])
    other = _GridLocator(fine.mesh).evaluate(
        fine.u, pts.reshape(-1, 2)).reshape(own.shape)
    sq = ((own - other)**2 * QUAD_WEIGHTS).sum(axis=1)
    return math.sqrt(float((mesh.areas() * sq).sum()))


@dataclass(frozen=True)
class FieldReport:
    """One solve summarized: induction field, norms, and run metadata."""

    domain: str
    level: int
    h: float
    b: np.ndarray
    linf_b: float
    linf_b_triangle: int
    ell: float
    l2_u: float
    h1_semi_u: float
    num_vertices: int
    num_triangles: int
    min_angle_deg: float
    cg_iterations: int
    relative_residual: float
    mu: float

    def __post_init__(self):
        b = np.ascontiguousarray(np.asarray(self.b, dtype=float))
        b.flags.writeable = False
        object.__setattr__(self, "b", b)
        for name in ("linf_b", "ell", "l2_u", "h1_semi_u"):
            if not math.isfinite(getattr(self, name)):
                raise SolverError(f"non-finite report value for {name}")


def build_report(sol: FemSolution, spec: DomainSpec,
                 g: GradingParams) -> FieldReport:
    """Assemble the per-run report for a solved problem.

    The boundary-length column is the measured outline length for polygonal
    domains; the circle fixture reports the ideal circumference of the circle
    its polygon stands for.
    """
    b = b_field(sol)
    peak = linf_b(sol)
    l2, h1 = solution_norms(sol)
    if spec.kind == "circle":
        ell = spec.nominal_boundary_length
    else:
        ell = boundary_length(spec.boundary())
    return FieldReport(
        domain=spec.label,
        level=spec.level,
        h=g.h,
        b=b,
        linf_b=peak.value,
        linf_b_triangle=peak.triangle,
        ell=ell,
        l2_u=l2,
        h1_semi_u=h1,
        num_vertices=sol.mesh.num_vertices,
        num_triangles=sol.mesh.num_triangles,
        min_angle_deg=sol.mesh.min_angle_deg(),
        cg_iterations=sol.iterations,
        relative_residual=sol.relative_residual,
        mu=sol.mu,
    )
