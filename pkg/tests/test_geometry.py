"""Geometry tests: snowflake construction, corner classification, predicates.

Derived expectations are computed by independent oracles in this file (scalar
angle walk, winding-number membership, brute-force distances) rather than by
the implementation under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kochfem.errors import GeometryError
from kochfem.geometry import (
    DomainSpec,
    PrefractalBoundary,
    boundary_length,
    build_snowflake,
    circle_polygon,
    classify_corners,
    distance_to_reentrant,
    distances_to_reentrant,
    interior_angles,
    koch_subdivide,
    point_in_polygon,
    points_in_polygon,
    polygon_area,
    square_polygon,
)

SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------- oracles


def oracle_interior_angle(verts, i):
    """Interior angle at vertex i via a scalar atan2 walk."""
    m = len(verts)
    prev_v = verts[(i - 1) % m]
    cur = verts[i]
    nxt = verts[(i + 1) % m]
    din = (cur[0] - prev_v[0], cur[1] - prev_v[1])
    dout = (nxt[0] - cur[0], nxt[1] - cur[1])
    cross = din[0] * dout[1] - din[1] * dout[0]
    dot = din[0] * dout[0] + din[1] * dout[1]
    return math.pi - math.atan2(cross, dot)


def oracle_winding_inside(x, y, verts):
    """Winding-number membership test (independent of the crossing test)."""
    angle = 0.0
    m = len(verts)
    for i in range(m):
        ax, ay = verts[i][0] - x, verts[i][1] - y
        bx, by = verts[(i + 1) % m][0] - x, verts[(i + 1) % m][1] - y
        angle += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return abs(angle) > math.pi  # ~2*pi inside, ~0 outside


def closed_form_area(n):
    """Generation-n snowflake area: (sqrt3/4) * (8/5 - (3/5) * (4/9)^n)."""
    return (SQRT3 / 4.0) * (8.0 / 5.0 - (3.0 / 5.0) * (4.0 / 9.0) ** n)


# ---------------------------------------------------------------- koch_subdivide


def test_subdivide_unit_segment_matches_hand_values():
    out = koch_subdivide((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
    expect = np.array([
        [0.0, 0.0],
        [1.0 / 3.0, 0.0],
        [0.5, SQRT3 / 6.0],
        [2.0 / 3.0, 0.0],
        [1.0, 0.0],
    ])
    assert np.allclose(out, expect, atol=1e-15)


def test_subdivide_respects_side_flag():
    out = koch_subdivide((0.0, 0.0), (1.0, 0.0), (0.0, -1.0))
    assert out[2, 1] == pytest.approx(-SQRT3 / 6.0)


def test_subdivide_contraction_ratio():
    out = koch_subdivide((0.0, 0.0), (3.0, 0.0), (0.0, 1.0))
    lengths = np.hypot(*np.diff(out, axis=0).T)
    assert np.allclose(lengths, 1.0, rtol=1e-15)


@given(
    px=st.floats(-10, 10), py=st.floats(-10, 10),
    qx=st.floats(-10, 10), qy=st.floats(-10, 10),
)
@settings(max_examples=200)
def test_subdivide_apex_distance_property(px, py, qx, qy):
    """Apex sits at distance |q-p|*sqrt(3)/6 from the segment midpoint."""
    seg = math.hypot(qx - px, qy - py)
    if seg < 1e-6:
        return
    out = koch_subdivide((px, py), (qx, qy), (-(qy - py), qx - px))
    mid = np.array([(px + qx) / 2.0, (py + qy) / 2.0])
    assert np.hypot(*(out[2] - mid)) == pytest.approx(seg * SQRT3 / 6.0, rel=1e-12)


def test_subdivide_degenerate_segment_rejected():
    with pytest.raises(GeometryError):
        koch_subdivide((0.0, 0.0), (0.0, 1e-15), (1.0, 0.0))


def test_subdivide_ambiguous_side_rejected():
    with pytest.raises(GeometryError):
        koch_subdivide((0.0, 0.0), (1.0, 0.0), (1.0, 0.0))


# ---------------------------------------------------------------- build_snowflake


@pytest.mark.parametrize("n,nverts,nreent", [(0, 3, 0), (1, 12, 6), (2, 48, 30), (3, 192, 126)])
def test_snowflake_counts(n, nverts, nreent):
    b = build_snowflake(n)
    assert b.num_vertices == nverts == 3 * 4 ** n
    assert len(b.reentrant) == nreent == 2 * (4 ** n - 1)


def test_snowflake_reentrant_angles_by_oracle():
    b = build_snowflake(1)
    angles = [oracle_interior_angle(b.vertices, i) for i in range(12)]
    reent = [i for i, a in enumerate(angles) if a > math.pi + 1e-9]
    assert sorted(b.reentrant.tolist()) == reent
    for i in reent:
        assert angles[i] == pytest.approx(4.0 * math.pi / 3.0, abs=1e-9)
    # the rest are the 60-degree tips and original corners
    for i in set(range(12)) - set(reent):
        assert angles[i] == pytest.approx(math.pi / 3.0, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_snowflake_segment_lengths_and_total(n):
    b = build_snowflake(n)
    p, q = b.segments()
    lengths = np.hypot(*(q - p).T)
    assert np.allclose(lengths, 3.0 ** (-n), rtol=1e-12)
    assert boundary_length(b) == pytest.approx(3.0 * (4.0 / 3.0) ** n, rel=1e-12)


@pytest.mark.parametrize("n,expect", [(1, 4.0), (3, 64.0 / 9.0), (5, 1024.0 / 81.0)])
def test_boundary_length_table_rows(n, expect):
    assert boundary_length(build_snowflake(n)) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_snowflake_vertex_nesting(n):
    coarse = build_snowflake(n - 1)
    fine = build_snowflake(n)
    fine_set = {(x, y) for x, y in fine.vertices}
    # construction copies endpoints verbatim, so membership is exact
    for x, y in coarse.vertices:
        assert (x, y) in fine_set


def test_snowflake_area_strictly_increases():
    areas = [polygon_area(build_snowflake(n)) for n in range(6)]
    assert all(b > a for a, b in zip(areas, areas[1:]))


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_snowflake_area_closed_form(n):
    assert polygon_area(build_snowflake(n)) == pytest.approx(closed_form_area(n), rel=1e-12)


def test_snowflake_level_bounds():
    with pytest.raises(GeometryError):
        build_snowflake(9)
    with pytest.raises(GeometryError):
        build_snowflake(-1)


# ---------------------------------------------------------------- classify_corners


def test_classify_square_has_no_reentrant():
    assert classify_corners(square_polygon().vertices).size == 0


def test_classify_l_shape():
    ell = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    assert classify_corners(ell).tolist() == [3]
    assert oracle_interior_angle(ell, 3) == pytest.approx(3.0 * math.pi / 2.0)


def test_classify_rejects_clockwise():
    cw = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)
    with pytest.raises(GeometryError):
        classify_corners(cw)


def test_classify_rejects_self_intersection():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(GeometryError):
        classify_corners(bowtie)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_snowflake_simplicity_larger_levels(n):
    # classify_corners runs the simplicity check internally
    b = build_snowflake(n)
    assert len(b.reentrant) == 2 * (4 ** n - 1)


# ---------------------------------------------------------------- predicates


def test_distance_to_reentrant_at_corner_is_zero():
    b = build_snowflake(1)
    corner = b.vertices[b.reentrant[0]]
    assert distance_to_reentrant(corner, b) == 0.0


def test_distance_to_reentrant_square_sentinel():
    assert distance_to_reentrant((0.3, 0.3), square_polygon()) == math.inf


@given(x=st.floats(-1, 2), y=st.floats(-1, 2))
@settings(max_examples=100, deadline=None)
def test_distance_to_reentrant_brute_force_oracle(x, y):
    b = build_snowflake(2)
    expect = min(math.hypot(x - vx, y - vy) for vx, vy in b.vertices[b.reentrant])
    assert distance_to_reentrant((x, y), b) == pytest.approx(expect, rel=1e-14, abs=1e-300)


def test_distances_kdtree_path_matches_broadcast():
    b = build_snowflake(4)  # 510 corners
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.5, 1.5, size=(9000, 2))  # large enough for the tree path
    got = distances_to_reentrant(pts, b)
    corners = b.vertices[b.reentrant]
    brute = np.sqrt(((pts[:, None, :] - corners[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    assert np.allclose(got, brute, rtol=1e-13)


def test_point_in_polygon_basics():
    tri = build_snowflake(0)
    assert point_in_polygon((0.5, SQRT3 / 6.0), tri)
    assert not point_in_polygon((10.0, 10.0), tri)


def test_point_on_boundary_counts_inside():
    sq = square_polygon()
    assert point_in_polygon((0.5, 0.0), sq)
    assert point_in_polygon((0.0, 0.0), sq)
    assert point_in_polygon((0.5, -1e-13), sq)


def test_points_in_polygon_against_winding_oracle():
    b = build_snowflake(2)
    rng = np.random.default_rng(42)
    pts = rng.uniform(-0.6, 1.6, size=(10_000, 2))
    got = points_in_polygon(pts, b.vertices)
    expect = np.array([oracle_winding_inside(x, y, b.vertices) for x, y in pts])
    assert np.array_equal(got, expect)


# ---------------------------------------------------------------- circle / fixtures


def test_circle_polygon_vertex_distances():
    b = circle_polygon(1.0, 4, center=(0.0, 0.0))
    assert np.allclose(np.hypot(*b.vertices.T), 1.0, rtol=1e-15)


def test_circle_polygon_limits_at_512():
    r = 0.5
    b = circle_polygon(r, 512)
    assert boundary_length(b) == pytest.approx(2.0 * math.pi * r, rel=1e-4)
    assert polygon_area(b) == pytest.approx(math.pi * r * r, rel=1e-4)
    assert b.reentrant.size == 0


def test_circle_polygon_is_ccw_and_centered():
    b = circle_polygon(0.5, 64)
    assert polygon_area(b) > 0
    assert np.allclose(b.vertices.mean(axis=0), [0.5, SQRT3 / 6.0], atol=1e-14)


# ---------------------------------------------------------------- DomainSpec


def test_domain_spec_boundaries():
    assert DomainSpec("snowflake", level=1).boundary().num_vertices == 12
    assert DomainSpec("circle").boundary().num_vertices == 256
    assert DomainSpec("square").boundary().num_vertices == 4


def test_domain_spec_nominal_lengths():
    assert DomainSpec("circle", radius=0.5).nominal_boundary_length == pytest.approx(math.pi)
    assert DomainSpec("snowflake", level=2).nominal_boundary_length == pytest.approx(16.0 / 3.0)
    assert DomainSpec("square").nominal_boundary_length == 4.0


def test_domain_spec_validation():
    with pytest.raises(GeometryError):
        DomainSpec("circle", radius=-1.0)
    with pytest.raises(GeometryError):
        DomainSpec("circle", segments=4)
    with pytest.raises(GeometryError):
        DomainSpec("snowflake", level=9)
    with pytest.raises(GeometryError):
        DomainSpec("blob")


def test_boundary_vertices_are_immutable():
    b = build_snowflake(1)
    with pytest.raises(ValueError):
        b.vertices[0, 0] = 5.0
