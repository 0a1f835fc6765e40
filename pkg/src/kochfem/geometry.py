"""Pre-fractal snowflake boundaries, polygonal fixtures, and geometric predicates.

The snowflake curve of generation n is a closed polygon with 3*4^n segments of
length 3^(-n).  Every middle-third bump introduces two corners with interior
angle 4*pi/3; meshing grades element sizes toward exactly those corners, so the
boundary object carries its reentrant-vertex classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import GeometryError

__all__ = [
    "Point2",
    "PrefractalBoundary",
    "DomainSpec",
    "TRIANGLE_CENTROID",
    "koch_subdivide",
    "build_snowflake",
    "classify_corners",
    "interior_angles",
    "boundary_length",
    "polygon_area",
    "distance_to_reentrant",
    "distances_to_reentrant",
    "point_in_polygon",
    "points_in_polygon",
    "circle_polygon",
    "square_polygon",
]

# Tolerances shared across the module.
DEGENERATE_SEGMENT = 1e-14
FLAT_ANGLE_TOL = 1e-9       # radians; turns smaller than this count as straight
BOUNDARY_TOL = 1e-12        # points this close to the polygon count as inside

_SQRT3 = np.sqrt(3.0)


class Point2(NamedTuple):
    """A point in the plane; unpacks like a plain (x1, x2) tuple."""

    x1: float
    x2: float


#: Centroid of the generating triangle; every domain is centered here.
TRIANGLE_CENTROID = Point2(0.5, _SQRT3 / 6.0)


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite point {p!r}")
    return a


@dataclass(frozen=True)
class PrefractalBoundary:
    """Closed CCW polygon with its reentrant corners marked.

    Parameters
    ----------
    level : int
        Construction generation (0 for the fixtures).
    vertices : (m, 2) float array
        Polygon vertices in counterclockwise order; the closing edge from the
        last vertex back to the first is implicit.
    reentrant : int array
        Sorted indices of vertices whose interior angle exceeds pi.
    center : Point2
        The common center shared by all benchmark domains.
    """

    level: int
    vertices: np.ndarray
    reentrant: np.ndarray
    center: Point2 = TRIANGLE_CENTROID

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise GeometryError("boundary needs an (m, 2) vertex array, m >= 3")
        if not np.all(np.isfinite(verts)):
            raise GeometryError("boundary vertices must be finite")
        reent = np.asarray(self.reentrant, dtype=np.int64).ravel()
        reent = np.unique(reent)
        if reent.size and (reent[0] < 0 or reent[-1] >= len(verts)):
            raise GeometryError("reentrant index out of range")
        verts.flags.writeable = False
        reent.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "reentrant", reent)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start and end arrays, each (m, 2)."""
        v = self.vertices
        return v, np.roll(v, -1, axis=0)


def koch_subdivide(p, q, outward) -> np.ndarray:
    """Replace segment pq by its four-segment middle-third bump.

    Parameters
    ----------
    p, q : point-like
        Segment endpoints.
    outward : point-like
        Side flag: the bump apex is placed on the side of pq this vector
        points to.  Only its sign against the segment normal matters.

    Returns
    -------
    (5, 2) array
        ``[p, a, t, b, q]`` with a, b trisecting pq and t the apex of the
        equilateral bump over the middle third.  All four sub-segments have
        length |q - p| / 3.
    """
    p = _as_point(p)
    q = _as_point(q)
    d = q - p
    if float(np.hypot(*d)) < DEGENERATE_SEGMENT:
        raise GeometryError("degenerate segment: |q - p| below 1e-14")
    side = _as_point(outward)
    left = np.array([-d[1], d[0]])  # 90-degree left normal, length |q - p|
    sign = float(side @ left)
    if abs(sign) < DEGENERATE_SEGMENT * float(np.hypot(*d)):
        raise GeometryError("outward flag is parallel to the segment; side is ambiguous")
    apex = (p + q) / 2.0 + np.copysign(_SQRT3 / 6.0, sign) * left
    return np.array([p, p + d / 3.0, apex, p + 2.0 * d / 3.0, q])


def build_snowflake(n: int) -> PrefractalBoundary:
    """Construct the generation-n snowflake boundary.

    Starts from the equilateral triangle (0,0), (1,0), (1/2, sqrt(3)/2)
    traversed counterclockwise and subdivides every segment n times with the
    bump apex on the outward (right-of-travel) side.

    Returns
    -------
    PrefractalBoundary
        3*4^n vertices; reentrant corners classified by angle.
    """
    if not 0 <= int(n) <= 8:
        raise GeometryError(f"snowflake level must be in [0, 8], got {n}")
    n = int(n)
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, _SQRT3 / 2.0]])
    for _ in range(n):
        pieces = []
        for i in range(len(verts)):
            p = verts[i]
            q = verts[(i + 1) % len(verts)]
            d = q - p
            # CCW polygon keeps the interior on the left, so outward is the
            # right-hand normal of the direction of travel.
            sub = koch_subdivide(p, q, (d[1], -d[0]))
            pieces.append(sub[:4])
        verts = np.concatenate(pieces)
    reentrant = classify_corners(verts)
    return PrefractalBoundary(level=n, vertices=verts, reentrant=reentrant)


def interior_angles(vertices: np.ndarray) -> np.ndarray:
    """Interior angle at every vertex of a CCW polygon, each in (0, 2*pi)."""
    v = np.asarray(vertices, dtype=float)
    d_in = v - np.roll(v, 1, axis=0)
    d_out = np.roll(v, -1, axis=0) - v
    cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
    dot = np.einsum("ij,ij->i", d_in, d_out)
    return np.pi - np.arctan2(cross, dot)


def classify_corners(vertices: np.ndarray) -> np.ndarray:
    """Indices of reentrant corners (interior angle > pi + 1e-9).

    Raises
    ------
    GeometryError
        If the polygon is not simple or not counterclockwise.
    """
    v = np.asarray(vertices, dtype=float)
    if polygon_area(v) <= 0.0:
        raise GeometryError("polygon must be counterclockwise (positive area)")
    if not _polygon_is_simple(v):
        raise GeometryError("polygon is not simple (self-intersecting)")
    angles = interior_angles(v)
    return np.flatnonzero(angles > np.pi + FLAT_ANGLE_TOL).astype(np.int64)


def boundary_length(b: PrefractalBoundary | np.ndarray) -> float:
    """Total length of the closed polygon (pairwise-summed, 1e-12 accurate)."""
    v = b.vertices if isinstance(b, PrefractalBoundary) else np.asarray(b, dtype=float)
    return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))


def polygon_area(b: PrefractalBoundary | np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise orientation."""
    v = b.vertices if isinstance(b, PrefractalBoundary) else np.asarray(b, dtype=float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def distance_to_reentrant(x, b: PrefractalBoundary) -> float:
    """Distance from x to the nearest reentrant corner (+inf if there is none)."""
    return float(distances_to_reentrant(np.asarray(x, dtype=float).reshape(1, 2), b)[0])


def distances_to_reentrant(points: np.ndarray, b: PrefractalBoundary) -> np.ndarray:
    """Vectorized nearest-reentrant-corner distances for an (N, 2) array."""
    pts = np.asarray(points, dtype=float)
    if b.reentrant.size == 0:
        return np.full(len(pts), np.inf)
    corners = b.vertices[b.reentrant]
    if len(pts) * len(corners) > 1 << 22:
        # Large query: a KD-tree beats the quadratic broadcast.
        from scipy.spatial import cKDTree

        d, _ = cKDTree(corners).query(pts, k=1)
        return np.asarray(d, dtype=float)
    diff = pts[:, None, :] - corners[None, :, :]
    return np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))


def point_in_polygon(x, b: PrefractalBoundary | np.ndarray) -> bool:
    """Crossing-number membership test; boundary points (within 1e-12) count as inside."""
    v = b.vertices if isinstance(b, PrefractalBoundary) else np.asarray(b, dtype=float)
    return bool(points_in_polygon(np.asarray(x, dtype=float).reshape(1, 2), v)[0])


def points_in_polygon(points: np.ndarray, vertices: np.ndarray,
                      boundary_tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorized crossing-number test for an (N, 2) point array.

    Points within `boundary_tol` of the polygon are reported inside, which
    makes the predicate stable for queries sitting exactly on lattice edges.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    inside = np.zeros(len(pts), dtype=bool)
    # Chunk the broadcast so memory stays flat for big boundaries.
    chunk = max(1, (1 << 22) // max(len(v), 1))
    for lo in range(0, len(pts), chunk):
        p = pts[lo:lo + chunk]
        px = p[:, 0:1]
        py = p[:, 1:2]
        y1 = v[None, :, 1]
        y2 = w[None, :, 1]
        x1 = v[None, :, 0]
        x2 = w[None, :, 0]
        straddle = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        hits = straddle & (px < x_cross)
        parity = (np.count_nonzero(hits, axis=1) % 2).astype(bool)
        if boundary_tol > 0.0:
            near = _min_segment_distance(p, v, w) <= boundary_tol
            parity |= near
        inside[lo:lo + chunk] = parity
    return inside


def _min_segment_distance(pts: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Min distance from each point to any polygon segment (broadcasted)."""
    d = w - v                                   # (m, 2)
    len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    rel = pts[:, None, :] - v[None, :, :]       # (n, m, 2)
    t = np.clip(np.einsum("nmj,mj->nm", rel, d) / len2, 0.0, 1.0)
    proj = rel - t[:, :, None] * d[None, :, :]
    return np.sqrt(np.min(np.einsum("nmj,nmj->nm", proj, proj), axis=1))


def _polygon_is_simple(v: np.ndarray) -> bool:
    """Spatial-hash pairwise check that no two non-adjacent segments touch."""
    m = len(v)
    w = np.roll(v, -1, axis=0)
    seg_len = np.hypot(*(w - v).T)
    if np.any(seg_len < DEGENERATE_SEGMENT):
        raise GeometryError("zero-length polygon segment")
    cell = float(np.max(seg_len))
    lo = np.minimum(v, w)
    hi = np.maximum(v, w)
    i0 = np.floor(lo / cell).astype(np.int64)
    i1 = np.floor(hi / cell).astype(np.int64)
    buckets: dict[tuple[int, int], list[int]] = {}
    for s in range(m):
        for ix in range(i0[s, 0], i1[s, 0] + 1):
            for iy in range(i0[s, 1], i1[s, 1] + 1):
                buckets.setdefault((ix, iy), []).append(s)
    seen: set[tuple[int, int]] = set()
    for members in buckets.values():
        for a_i in range(len(members)):
            for b_i in range(a_i + 1, len(members)):
                a, b = members[a_i], members[b_i]
                if b - a == 1 or (a == 0 and b == m - 1):
                    continue  # adjacent segments share one endpoint by design
                key = (a, b)
                if key in seen:
                    continue
                seen.add(key)
                if _segments_touch(v[a], w[a], v[b], w[b]):
                    return False
    return True


def _segments_touch(p1, q1, p2, q2) -> bool:
    """True if closed segments p1q1 and p2q2 share any point."""
    d1 = _orient(p1, q1, p2)
    d2 = _orient(p1, q1, q2)
    d3 = _orient(p2, q2, p1)
    d4 = _orient(p2, q2, q1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0:
        return True
    for (a, b, c, d) in ((p1, q1, p2, d1), (p1, q1, q2, d2),
                         (p2, q2, p1, d3), (p2, q2, q1, d4)):
        if d == 0 and _on_segment(a, b, c):
            return True
    return False


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))


def circle_polygon(radius: float, m: int, center=TRIANGLE_CENTROID) -> PrefractalBoundary:
    """Regular m-gon inscribed in the circle of the given radius, CCW."""
    if radius <= 0.0:
        raise GeometryError("radius must be positive")
    if int(m) < 3:
        raise GeometryError("need at least 3 segments")
    m = int(m)
    c = _as_point(center)
    theta = 2.0 * np.pi * np.arange(m) / m
    verts = c + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return PrefractalBoundary(level=0, vertices=verts,
                              reentrant=np.empty(0, dtype=np.int64),
                              center=Point2(*c))


def square_polygon() -> PrefractalBoundary:
    """The unit-square verification fixture."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return PrefractalBoundary(level=0, vertices=verts,
                              reentrant=np.empty(0, dtype=np.int64),
                              center=Point2(0.5, 0.5))


@dataclass(frozen=True)
class DomainSpec:
    """Tagged description of a computational domain.

    kind is one of "snowflake" (generation `level`), "circle" (regular
    `segments`-gon of `radius`), or "square" (unit fixture).
    """

    kind: str
    level: int = 0
    radius: float = 0.5
    segments: int = 256
    center: Point2 = TRIANGLE_CENTROID

    def __post_init__(self):
        if self.kind not in ("snowflake", "circle", "square"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.kind == "snowflake" and not 0 <= self.level <= 8:
            raise GeometryError("snowflake level must be in [0, 8]")
        if self.kind == "circle":
            if self.radius <= 0.0:
                raise GeometryError("circle radius must be positive")
            if self.segments < 8:
                raise GeometryError("circle needs at least 8 segments")

    def boundary(self) -> PrefractalBoundary:
        if self.kind == "snowflake":
            return build_snowflake(self.level)
        if self.kind == "circle":
            return circle_polygon(self.radius, self.segments, self.center)
        return square_polygon()

    @property
    def nominal_boundary_length(self) -> float:
        """Boundary length of the idealized domain (2*pi*r for the circle)."""
        if self.kind == "snowflake":
            return 3.0 * (4.0 / 3.0) ** self.level
        if self.kind == "circle":
            return 2.0 * np.pi * self.radius
        return 4.0

    @property
    def label(self) -> str:
        if self.kind == "snowflake":
            return f"snowflake_{self.level}"
        return self.kind
