"""Conforming triangulations with corner grading and nested refinement.

Snowflake domains are exact unions of equilateral lattice triangles of side
3^(-n), so the base mesh is a clipped triangular lattice and the boundary is
represented exactly.  Refinement is newest-vertex bisection driven by a graded
size field that shrinks like r^eta toward reentrant corners; uniform (red)
refinement supplies the reference ladders.  Every refined mesh records parent
triangles and midpoint lineage, which later makes inter-mesh interpolation
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MeshError
from .geometry import (
    PrefractalBoundary,
    distances_to_reentrant,
    polygon_area,
)

__all__ = [
    "TriMesh",
    "GradingParams",
    "GradingReport",
    "base_lattice_mesh",
    "polygon_base_mesh",
    "grisvard_target_size",
    "target_sizes",
    "refine_to_size",
    "check_grisvard",
    "uniform_refine",
    "edge_table",
    "MIN_ANGLE_DEG",
]

_SQRT3 = np.sqrt(3.0)

#: Shape-regularity floor maintained by every mesh this module produces.
MIN_ANGLE_DEG = 20.0

AREA_FLOOR = 1e-16
AREA_MATCH_RTOL = 1e-10


@dataclass(frozen=True)
class TriMesh:
    """Immutable conforming triangle mesh.

    Fields
    ------
    vertices : (n, 2) float array
    triangles : (m, 3) int array, counterclockwise vertex triples
    boundary_vertex : (n,) bool array, True where the vertex lies on the
        domain polygon
    refinement_edge : (m,) int8 array; local index k means the next bisection
        edge of triangle t is the one opposite vertex ``triangles[t, k]``
    parent_triangle : (m,) int array into the previous hierarchy level, or
        None for a base mesh
    vertex_parents : (n, 2) int array; midpoint vertices record the two edge
        endpoints they bisected (-1, -1 for base vertices).  This lineage is
        what makes piecewise-linear prolongation exact.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    refinement_edge: np.ndarray
    parent_triangle: np.ndarray | None = None
    vertex_parents: np.ndarray | None = None

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        bnd = np.ascontiguousarray(np.asarray(self.boundary_vertex, dtype=bool))
        refe = np.ascontiguousarray(np.asarray(self.refinement_edge, dtype=np.int8))
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be (n, 2)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be (m, 3)")
        if bnd.shape != (len(verts),) or refe.shape != (len(tris),):
            raise MeshError("per-vertex/per-triangle array length mismatch")
        parent = self.parent_triangle
        if parent is not None:
            parent = np.ascontiguousarray(np.asarray(parent, dtype=np.int64))
            parent.flags.writeable = False
        vpar = self.vertex_parents
        if vpar is None:
            vpar = np.full((len(verts), 2), -1, dtype=np.int64)
        else:
            vpar = np.ascontiguousarray(np.asarray(vpar, dtype=np.int64))
        for a in (verts, tris, bnd, refe, vpar):
            a.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_vertex", bnd)
        object.__setattr__(self, "refinement_edge", refe)
        object.__setattr__(self, "parent_triangle", parent)
        object.__setattr__(self, "vertex_parents", vpar)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def tri_coords(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (m, 3, 2)."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        c = self.tri_coords()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.tri_coords().mean(axis=1)

    def side_lengths(self) -> np.ndarray:
        """Side lengths (m, 3); entry k is the side opposite local vertex k."""
        c = self.tri_coords()
        out = np.empty((len(c), 3))
        for k in range(3):
            d = c[:, (k + 2) % 3] - c[:, (k + 1) % 3]
            out[:, k] = np.hypot(d[:, 0], d[:, 1])
        return out

    def diameters(self) -> np.ndarray:
        return self.side_lengths().max(axis=1)

    def angles_deg(self) -> np.ndarray:
        """Corner angles in degrees, shape (m, 3)."""
        s = self.side_lengths()
        out = np.empty_like(s)
        for k in range(3):
            a = s[:, k]
            b = s[:, (k + 1) % 3]
            c = s[:, (k + 2) % 3]
            cosk = np.clip((b * b + c * c - a * a) / (2.0 * b * c), -1.0, 1.0)
            out[:, k] = np.degrees(np.arccos(cosk))
        return out

    def min_angle_deg(self) -> float:
        return float(self.angles_deg().min())

    @cached_property
    def _edges(self):
        return edge_table(self.triangles, self.num_vertices)


def edge_table(triangles: np.ndarray, num_vertices: int):
    """Unique-edge bookkeeping for a triangle array.

    Returns
    -------
    edge_verts : (E, 2) int array, each row an ascending vertex pair
    tri_edge : (m, 3) int array; entry (t, k) is the edge id of the side
        opposite local vertex k of triangle t
    counts : (E,) int array, number of incident triangles per edge
    """
    t = np.asarray(triangles, dtype=np.int64)
    pairs = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
    pairs = np.sort(pairs.reshape(-1, 2), axis=1)
    keys = pairs[:, 0] * np.int64(num_vertices) + pairs[:, 1]
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    edge_verts = np.column_stack([uniq // num_vertices, uniq % num_vertices])
    return edge_verts, inverse.reshape(-1, 3), counts


def _init_refinement_edges(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Longest-edge initialization; ties go to the lowest opposite vertex index."""
    c = vertices[triangles]
    lengths = np.empty((len(triangles), 3))
    for k in range(3):
        d = c[:, (k + 2) % 3] - c[:, (k + 1) % 3]
        lengths[:, k] = np.hypot(d[:, 0], d[:, 1])
    longest = lengths.max(axis=1, keepdims=True)
    tied = lengths >= longest * (1.0 - 1e-12)
    opposite = np.where(tied, triangles, np.iinfo(np.int64).max)
    return np.argmin(opposite, axis=1).astype(np.int8)


def _boundary_flags(triangles: np.ndarray, num_vertices: int) -> np.ndarray:
    """Vertices incident to an edge with exactly one triangle."""
    edge_verts, _, counts = edge_table(triangles, num_vertices)
    flags = np.zeros(num_vertices, dtype=bool)
    flags[edge_verts[counts == 1].ravel()] = True
    return flags


# ------------------------------------------------------------------ base meshes


def base_lattice_mesh(b: PrefractalBoundary) -> TriMesh:
    """Tile a snowflake domain exactly with lattice triangles of side 3^(-n).

    A lattice triangle is kept iff its centroid lies inside the polygon
    (crossing-parity test evaluated row by row; centroid rows never pass
    through lattice vertices, so the test is exact for this geometry).  The
    kept-triangle area must reproduce the polygon area to 1e-10 relative or
    the construction aborts.
    """
    n = b.level
    s = 3.0 ** (-n)
    h_row = s * _SQRT3 / 2.0
    v = b.vertices
    xmin, ymin = v.min(axis=0)
    xmax, ymax = v.max(axis=0)
    j_lo = int(np.floor(ymin / h_row)) - 1
    j_hi = int(np.ceil(ymax / h_row)) + 1
    # x = (i + j/2) * s  =>  i = x/s - j/2; widen by the extreme j offsets
    i_lo = int(np.floor(xmin / s - max(j_lo, j_hi) / 2.0)) - 1
    i_hi = int(np.ceil(xmax / s - min(j_lo, j_hi) / 2.0)) + 1
    ii = np.arange(i_lo, i_hi + 1)

    seg_p, seg_q = b.segments()
    y1 = seg_p[:, 1]
    y2 = seg_q[:, 1]
    x1 = seg_p[:, 0]
    x2 = seg_q[:, 0]

    def row_inside(px: np.ndarray, y: float) -> np.ndarray:
        straddle = (y1 > y) != (y2 > y)
        if not straddle.any():
            return np.zeros(len(px), dtype=bool)
        xc = x1[straddle] + (y - y1[straddle]) * (x2[straddle] - x1[straddle]) \
            / (y2[straddle] - y1[straddle])
        xc.sort()
        return (np.searchsorted(xc, px) % 2).astype(bool)

    kept: list[tuple[np.ndarray, int, bool]] = []  # (i values, j, is_up)
    count = 0
    for j in range(j_lo, j_hi + 1):
        cx_up = s * (ii + j / 2.0 + 0.5)
        up = row_inside(cx_up, h_row * (j + 1.0 / 3.0))
        cx_dn = s * (ii + j / 2.0 + 1.0)
        dn = row_inside(cx_dn, h_row * (j + 2.0 / 3.0))
        if up.any():
            kept.append((ii[up], j, True))
            count += int(up.sum())
        if dn.any():
            kept.append((ii[dn], j, False))
            count += int(dn.sum())
    if count == 0:
        raise MeshError("lattice clipping kept no triangles")

    tri_area = (_SQRT3 / 4.0) * s * s
    poly_area = polygon_area(b)
    if abs(count * tri_area - poly_area) > AREA_MATCH_RTOL * poly_area:
        raise MeshError(
            f"lattice tiling area mismatch: {count} triangles cover "
            f"{count * tri_area:.15g}, polygon area {poly_area:.15g}")

    # Corner (i, j) pairs per triangle; up = (i,j),(i+1,j),(i,j+1),
    # down = (i+1,j),(i+1,j+1),(i,j+1).  Both orders are counterclockwise.
    corner_i = np.empty((count, 3), dtype=np.int64)
    corner_j = np.empty((count, 3), dtype=np.int64)
    pos = 0
    for i_vals, j, is_up in kept:
        k = len(i_vals)
        if is_up:
            corner_i[pos:pos + k] = np.column_stack([i_vals, i_vals + 1, i_vals])
            corner_j[pos:pos + k] = np.column_stack(
                [np.full(k, j), np.full(k, j), np.full(k, j + 1)])
        else:
            corner_i[pos:pos + k] = np.column_stack([i_vals + 1, i_vals + 1, i_vals])
            corner_j[pos:pos + k] = np.column_stack(
                [np.full(k, j), np.full(k, j + 1), np.full(k, j + 1)])
        pos += k

    jwidth = np.int64(j_hi - j_lo + 3)
    keys = (corner_i - i_lo) * jwidth + (corner_j - j_lo)
    uniq_keys, inverse = np.unique(keys.ravel(), return_inverse=True)
    tris = inverse.reshape(-1, 3).astype(np.int64)
    ui = uniq_keys // jwidth + i_lo
    uj = uniq_keys % jwidth + j_lo
    verts = np.column_stack([s * (ui + uj / 2.0), h_row * uj.astype(float)])

    return TriMesh(
        vertices=verts,
        triangles=tris,
        boundary_vertex=_boundary_flags(tris, len(verts)),
        refinement_edge=_init_refinement_edges(verts, tris),
    )


def polygon_base_mesh(b: PrefractalBoundary) -> TriMesh:
    """Shape-regular base triangulation for the polygonal fixtures.

    Small polygons are ear-clipped (best ear first).  Regular m-gons with many
    sides cannot be triangulated from their vertices alone without slivers --
    any triangle on a short chord has an inscribed angle of about pi/m -- so
    those get a concentric-ring construction with interior vertices instead.
    Either way the result must have minimum angle >= 20 degrees.
    """
    v = b.vertices
    m = len(v)
    centroid = v.mean(axis=0)
    radii = np.hypot(*(v - centroid).T)
    # Inscribed angles in a regular m-gon are multiples of 180/m degrees, so
    # for m >= 10 no vertex-only triangulation clears the 20-degree floor.
    is_regular = (b.reentrant.size == 0
                  and np.ptp(radii) <= 1e-9 * radii.mean()
                  and m >= 10)
    if is_regular:
        mesh = _ring_mesh(v, centroid, float(radii.mean()))
    else:
        tris = _ear_clip(v)
        mesh = TriMesh(
            vertices=v.copy(),
            triangles=tris,
            boundary_vertex=np.ones(m, dtype=bool),
            refinement_edge=_init_refinement_edges(v, tris),
        )
    if abs(float(mesh.areas().sum()) - polygon_area(b)) > 1e-12 * abs(polygon_area(b)):
        raise MeshError("triangulation does not partition the polygon")
    angle = mesh.min_angle_deg()
    if angle < MIN_ANGLE_DEG - 1e-9:
        raise MeshError(
            f"base triangulation of this polygon has minimum angle {angle:.2f} deg "
            f"(< {MIN_ANGLE_DEG}); refine the polygon description instead")
    return mesh


def _ear_clip(verts: np.ndarray) -> np.ndarray:
    """Greedy ear clipping, always taking the best-shaped available ear."""
    m = len(verts)
    idx = list(range(m))
    out: list[tuple[int, int, int]] = []

    def tri_min_angle(a, b, c):
        sides = np.array([np.hypot(*(c - b)), np.hypot(*(a - c)), np.hypot(*(b - a))])
        ang = []
        for k in range(3):
            s1, s2, s3 = sides[k], sides[(k + 1) % 3], sides[(k + 2) % 3]
            ang.append(np.arccos(np.clip((s2 * s2 + s3 * s3 - s1 * s1)
                                         / (2.0 * s2 * s3), -1, 1)))
        return min(ang)

    def contains(a, b, c, p, tol=1e-13):
        d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
        d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
        return d1 >= -tol and d2 >= -tol and d3 >= -tol

    while len(idx) > 3:
        best_pos = -1
        best_q = -1.0
        k = len(idx)
        for pos in range(k):
            ia, ib, ic = idx[pos - 1], idx[pos], idx[(pos + 1) % k]
            a, bb, c = verts[ia], verts[ib], verts[ic]
            area2 = (bb[0] - a[0]) * (c[1] - a[1]) - (bb[1] - a[1]) * (c[0] - a[0])
            if area2 <= AREA_FLOOR:
                continue
            if any(contains(a, bb, c, verts[other])
                   for other in idx if other not in (ia, ib, ic)):
                continue
            q = tri_min_angle(a, bb, c)
            if q > best_q:
                best_q, best_pos = q, pos
        if best_pos < 0:
            raise MeshError("ear clipping failed; polygon may be non-simple")
        k = len(idx)
        out.append((idx[best_pos - 1], idx[best_pos], idx[(best_pos + 1) % k]))
        del idx[best_pos]
    a, bb, c = (verts[i] for i in idx)
    if (bb[0] - a[0]) * (c[1] - a[1]) - (bb[1] - a[1]) * (c[0] - a[0]) <= AREA_FLOOR:
        raise MeshError("degenerate final triangle in ear clipping")
    out.append(tuple(idx))
    return np.asarray(out, dtype=np.int64)


def _ring_mesh(poly: np.ndarray, center: np.ndarray, radius: float) -> TriMesh:
    """Concentric-ring triangulation of a regular polygon (near-equilateral)."""
    m = len(poly)
    chord = float(np.hypot(*(poly[1] - poly[0])))
    rings = max(2, int(round(radius / (chord * _SQRT3 / 2.0))))
    phi0 = float(np.arctan2(poly[0, 1] - center[1], poly[0, 0] - center[0]))

    coords = [center.reshape(1, 2)]
    ring_ids: list[np.ndarray] = []
    next_id = 1
    for k in range(1, rings + 1):
        if k == rings:
            ring_xy = poly
        else:
            mk = max(6, int(round(m * k / rings)))
            theta = phi0 + 2.0 * np.pi * np.arange(mk) / mk
            ring_xy = center + (radius * k / rings) * np.column_stack(
                [np.cos(theta), np.sin(theta)])
        coords.append(ring_xy)
        ring_ids.append(np.arange(next_id, next_id + len(ring_xy)))
        next_id += len(ring_xy)
    verts = np.concatenate(coords)

    tris: list[tuple[int, int, int]] = []
    inner = ring_ids[0]
    for j in range(len(inner)):
        tris.append((0, inner[j], inner[(j + 1) % len(inner)]))
    for k in range(1, rings):
        tris.extend(_stitch_rings(ring_ids[k], ring_ids[k - 1], verts))

    tri_arr = np.asarray(tris, dtype=np.int64)
    return TriMesh(
        vertices=verts,
        triangles=tri_arr,
        boundary_vertex=_boundary_flags(tri_arr, len(verts)),
        refinement_edge=_init_refinement_edges(verts, tri_arr),
    )


def _stitch_rings(outer: np.ndarray, inner: np.ndarray, verts: np.ndarray):
    """Triangulate the annulus between two concentric CCW vertex rings."""
    na, nb = len(outer), len(inner)
    tris = []
    i = j = 0
    while i < na or j < nb:
        if i < na and j < nb:
            d_out = np.hypot(*(verts[outer[(i + 1) % na]] - verts[inner[j % nb]]))
            d_in = np.hypot(*(verts[outer[i % na]] - verts[inner[(j + 1) % nb]]))
            advance_outer = d_out <= d_in
        else:
            advance_outer = i < na
        if advance_outer:
            tris.append((outer[i % na], outer[(i + 1) % na], inner[j % nb]))
            i += 1
        else:
            tris.append((outer[i % na], inner[(j + 1) % nb], inner[j % nb]))
            j += 1
    return tris


# ------------------------------------------------------------------ size field


@dataclass(frozen=True)
class GradingParams:
    """Graded size-field parameters: tau ~ sigma*h*r^eta near corners.

    h is the global mesh size, eta in (1/4, 1) the grading exponent, sigma a
    slack constant, and cutoff the radius beyond which the field is uniform.
    """

    h: float
    eta: float = 0.30
    sigma: float = 1.0
    cutoff: float = 0.5

    def __post_init__(self):
        if not self.h > 0.0:
            raise MeshError("grading h must be positive")
        if not 0.25 < self.eta < 1.0:
            raise MeshError("grading eta must lie in (1/4, 1)")
        if not self.sigma >= 1.0:
            raise MeshError("grading sigma must be >= 1")
        if not self.cutoff > 0.0:
            raise MeshError("grading cutoff must be positive")


def target_sizes(points: np.ndarray, b: PrefractalBoundary,
                 g: GradingParams) -> np.ndarray:
    """Vectorized graded target diameter tau(x) for an (N, 2) point array.

    tau equals sigma * h^(1/(1-eta)) inside the corner layer of that radius,
    grows like sigma * h * r^eta with the distance r to the nearest reentrant
    corner, and saturates at sigma * h * cutoff^eta.  Domains without
    reentrant corners (r infinite) get the uniform far-field size.
    """
    r = distances_to_reentrant(points, b)
    knee = g.h ** (1.0 / (1.0 - g.eta))
    graded = g.sigma * g.h * np.minimum(r, g.cutoff) ** g.eta
    return np.where(r <= knee, g.sigma * knee, graded)


def grisvard_target_size(x, b: PrefractalBoundary, g: GradingParams) -> float:
    """Target diameter at a single point (see `target_sizes`)."""
    return float(target_sizes(np.asarray(x, dtype=float).reshape(1, 2), b, g)[0])


# ------------------------------------------------------------------ refinement


def refine_to_size(m: TriMesh, b: PrefractalBoundary, g: GradingParams,
                   max_sweeps: int = 60) -> TriMesh:
    """Bisect until every triangle diameter meets the graded target.

    Each sweep marks triangles whose diameter exceeds tau(centroid), bisects
    their refinement edges with conformity closure, and repeats.  The result
    is conforming and nested: parent_triangle maps every triangle to the
    triangle of `m` containing it, and the vertices of `m` come first in the
    vertex array.
    """
    mesh = m
    ancestors = np.arange(mesh.num_triangles, dtype=np.int64)
    for _ in range(max_sweeps):
        marked = mesh.diameters() > target_sizes(mesh.centroids(), b, g)
        if not marked.any():
            break
        mesh, ancestors = _bisect_marked(mesh, marked, ancestors)
    else:
        still = mesh.diameters() > target_sizes(mesh.centroids(), b, g)
        if still.any():
            raise MeshError(
                f"refinement did not reach the target field within {max_sweeps} "
                f"sweeps ({int(still.sum())} triangles above target)")
    return TriMesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles,
        boundary_vertex=mesh.boundary_vertex,
        refinement_edge=mesh.refinement_edge,
        parent_triangle=ancestors,
        vertex_parents=mesh.vertex_parents,
    )


def _bisect_marked(mesh: TriMesh, marked: np.ndarray, ancestors: np.ndarray):
    """One bisection sweep: close the marking, split, return (mesh, ancestors)."""
    tris = mesh.triangles
    nv = mesh.num_vertices
    edge_verts, tri_edge, counts = mesh._edges
    ref_local = mesh.refinement_edge.astype(np.int64)
    ref_edge_id = tri_edge[np.arange(len(tris)), ref_local]

    edge_marked = np.zeros(len(edge_verts), dtype=bool)
    edge_marked[ref_edge_id[marked]] = True
    # Conformity closure: a triangle with any marked edge must also have its
    # refinement edge marked; iterate to the fixed point.
    while True:
        has_marked = edge_marked[tri_edge].any(axis=1)
        need = has_marked & ~edge_marked[ref_edge_id]
        if not need.any():
            break
        edge_marked[ref_edge_id[need]] = True

    split_edges = np.flatnonzero(edge_marked)
    midpoint_id = np.full(len(edge_verts), -1, dtype=np.int64)
    midpoint_id[split_edges] = nv + np.arange(len(split_edges))
    new_coords = mesh.vertices[edge_verts[split_edges]].mean(axis=1)
    new_boundary = counts[split_edges] == 1
    new_parents = edge_verts[split_edges]

    touched = edge_marked[tri_edge].any(axis=1)
    keep = ~touched

    out_tris: list[tuple[int, int, int]] = []
    out_ref: list[int] = []
    out_anc: list[int] = []

    tri_list = tris.tolist()
    tri_edge_list = tri_edge.tolist()
    ref_list = ref_local.tolist()
    anc_list = ancestors.tolist()
    emarked = edge_marked
    mid = midpoint_id

    def bisect(vp, va, vb, mid_v, edge_pa, edge_pb, anc):
        """Split (vp, va, vb) at mid_v on edge (va, vb).

        edge_pa is the parent edge id opposite va (between vb and vp), and
        edge_pb the one opposite vb (between vp and va); the children's next
        refinement edges are exactly those original edges.
        """
        # child (vp, va, mid_v): refinement edge opposite mid_v = (vp, va)
        if edge_pb >= 0 and emarked[edge_pb]:
            m2 = mid[edge_pb]
            bisect(mid_v, vp, va, m2, -1, -1, anc)
        else:
            out_tris.append((vp, va, mid_v))
            out_ref.append(2)
            out_anc.append(anc)
        # child (vp, mid_v, vb): refinement edge opposite mid_v = (vb, vp)
        if edge_pa >= 0 and emarked[edge_pa]:
            m2 = mid[edge_pa]
            bisect(mid_v, vb, vp, m2, -1, -1, anc)
        else:
            out_tris.append((vp, mid_v, vb))
            out_ref.append(1)
            out_anc.append(anc)

    for t in np.flatnonzero(touched):
        tv = tri_list[t]
        te = tri_edge_list[t]
        p = ref_list[t]
        a = (p + 1) % 3
        bb = (p + 2) % 3
        bisect(tv[p], tv[a], tv[bb], mid[te[p]], te[a], te[bb], anc_list[t])

    kept_tris = tris[keep]
    kept_ref = mesh.refinement_edge[keep]
    kept_anc = ancestors[keep]

    new_tris = np.concatenate(
        [kept_tris, np.asarray(out_tris, dtype=np.int64).reshape(-1, 3)])
    new_refedge = np.concatenate(
        [kept_ref, np.asarray(out_ref, dtype=np.int8)])
    new_anc = np.concatenate(
        [kept_anc, np.asarray(out_anc, dtype=np.int64)])

    verts = np.concatenate([mesh.vertices, new_coords])
    boundary = np.concatenate([mesh.boundary_vertex, new_boundary])
    vparents = np.concatenate([mesh.vertex_parents, new_parents])

    new_mesh = TriMesh(
        vertices=verts,
        triangles=new_tris,
        boundary_vertex=boundary,
        refinement_edge=new_refedge,
        vertex_parents=vparents,
    )
    return new_mesh, new_anc


def uniform_refine(m: TriMesh) -> TriMesh:
    """Red refinement: every triangle into four similar children.

    Equivalent to two conforming bisection generations per triangle; halves
    every diameter exactly and preserves all angles, so shape regularity of
    the input carries over unchanged.
    """
    tris = m.triangles
    nv = m.num_vertices
    edge_verts, tri_edge, counts = m._edges
    mid_id = nv + np.arange(len(edge_verts))
    mid_coords = m.vertices[edge_verts].mean(axis=1)
    mid_boundary = counts == 1

    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m0 = mid_id[tri_edge[:, 0]]  # midpoint of edge (v1, v2)
    m1 = mid_id[tri_edge[:, 1]]  # midpoint of edge (v2, v0)
    m2 = mid_id[tri_edge[:, 2]]  # midpoint of edge (v0, v1)
    children = np.empty((len(tris), 4, 3), dtype=np.int64)
    children[:, 0] = np.column_stack([v0, m2, m1])
    children[:, 1] = np.column_stack([m2, v1, m0])
    children[:, 2] = np.column_stack([m1, m0, v2])
    children[:, 3] = np.column_stack([m0, m1, m2])
    new_tris = children.reshape(-1, 3)

    verts = np.concatenate([m.vertices, mid_coords])
    boundary = np.concatenate([m.boundary_vertex, mid_boundary])
    vparents = np.concatenate([m.vertex_parents, edge_verts])
    return TriMesh(
        vertices=verts,
        triangles=new_tris,
        boundary_vertex=boundary,
        refinement_edge=_init_refinement_edges(verts, new_tris),
        parent_triangle=np.repeat(np.arange(len(tris), dtype=np.int64), 4),
        vertex_parents=vparents,
    )


# ------------------------------------------------------------------ compliance


@dataclass(frozen=True)
class GradingReport:
    """check_grisvard output: worst size ratio plus shape statistics."""

    max_ratio: float
    passed: bool
    min_angle_deg: float
    num_triangles: int
    num_vertices: int


def check_grisvard(m: TriMesh, b: PrefractalBoundary, g: GradingParams) -> GradingReport:
    """Report max h_T / tau(centroid) over all triangles; pass iff <= 1 + 1e-9."""
    ratio = m.diameters() / target_sizes(m.centroids(), b, g)
    max_ratio = float(ratio.max())
    return GradingReport(
        max_ratio=max_ratio,
        passed=max_ratio <= 1.0 + 1e-9,
        min_angle_deg=m.min_angle_deg(),
        num_triangles=m.num_triangles,
        num_vertices=m.num_vertices,
    )
