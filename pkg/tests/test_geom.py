import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigidfold import geom
from oracles import (
    brute_directed_hausdorff,
    brute_hausdorff,
    exact_seg_intersect,
    sat_classify,
)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# seg_seg_intersect_2d
# ---------------------------------------------------------------------------


def test_seg_x_crossing():
    assert geom.seg_seg_intersect_2d((0, 0), (1, 1), (0, 1), (1, 0))


def test_seg_shared_endpoint_only():
    assert not geom.seg_seg_intersect_2d((0, 0), (1, 0), (1, 0), (2, 0))


def test_seg_collinear_overlap():
    assert geom.seg_seg_intersect_2d((0, 0), (2, 0), (1, 0), (3, 0))


def test_seg_t_touch_is_false():
    # Endpoint resting on the other segment's interior: no open crossing.
    assert not geom.seg_seg_intersect_2d((0, 0), (2, 0), (1, 0), (1, 1))


def test_seg_zero_length_raises():
    with pytest.raises(geom.ZeroLengthSegmentError):
        geom.seg_seg_intersect_2d((0, 0), (0, 0), (1, 0), (2, 0))


def test_seg_fuzz_against_exact_oracle():
    g = rng(7)
    n = 100_000
    pts = g.integers(0, 8, size=(n, 4, 2))
    checked = 0
    for p1, p2, q1, q2 in pts:
        p1, p2, q1, q2 = map(tuple, (p1, p2, q1, q2))
        if p1 == p2 or q1 == q2:
            continue
        checked += 1
        assert geom.seg_seg_intersect_2d(p1, p2, q1, q2) == exact_seg_intersect(
            p1, p2, q1, q2
        ), (p1, p2, q1, q2)
    assert checked > n // 2


@given(
    st.tuples(*[st.integers(-20, 20) for _ in range(8)]).filter(
        lambda t: (t[0], t[1]) != (t[2], t[3]) and (t[4], t[5]) != (t[6], t[7])
    )
)
@settings(max_examples=300, deadline=None)
def test_seg_symmetric_under_swaps(t):
    p1, p2, q1, q2 = (t[0], t[1]), (t[2], t[3]), (t[4], t[5]), (t[6], t[7])
    base = geom.seg_seg_intersect_2d(p1, p2, q1, q2)
    assert geom.seg_seg_intersect_2d(q1, q2, p1, p2) == base
    assert geom.seg_seg_intersect_2d(p2, p1, q1, q2) == base
    assert geom.seg_seg_intersect_2d(p1, p2, q2, q1) == base


# ---------------------------------------------------------------------------
# tri_tri_intersect
# ---------------------------------------------------------------------------


def tri(*pts):
    return [np.array(p, dtype=float) for p in pts]


def test_tri_far_apart():
    t1 = tri((0, 0, 0), (1, 0, 0), (0, 1, 0))
    t2 = tri((10, 0, 0), (11, 0, 0), (10, 1, 0))
    assert not geom.tri_tri_intersect(t1, t2)


def test_tri_identical():
    t1 = tri((0, 0, 0), (1, 0, 0), (0, 1, 0))
    assert geom.tri_tri_intersect(t1, [p.copy() for p in t1])


def test_tri_proper_crossing():
    t1 = tri((0, 0, 0), (2, 0, 0), (0, 2, 0))
    t2 = tri((0.5, 0.5, -1), (0.5, 0.5, 1), (1.5, 1.5, 1))
    assert geom.tri_tri_intersect(t1, t2)


def test_tri_degenerate_raises():
    t1 = tri((0, 0, 0), (1, 0, 0), (2, 0, 0))
    t2 = tri((0, 0, 0), (1, 0, 0), (0, 1, 0))
    with pytest.raises(geom.DegenerateTriangleError):
        geom.tri_tri_intersect(t1, t2)


def test_tri_shared_edge_hinged_is_false():
    # Two panels hinged along a shared edge at a dihedral: no intersection.
    t1 = tri((0, 0, 0), (1, 0, 0), (0.5, 1, 0))
    t2 = tri((0, 0, 0), (1, 0, 0), (0.5, -0.7, 0.7))
    assert not geom.tri_tri_intersect(t1, t2)


def test_tri_shared_edge_folded_flat_is_true():
    # Folded completely flat onto the same side: overlapping panels.
    t1 = tri((0, 0, 0), (1, 0, 0), (0.5, 1, 0))
    t2 = tri((0, 0, 0), (1, 0, 0), (0.5, 0.8, 0))
    assert geom.tri_tri_intersect(t1, t2)


def test_tri_shared_vertex_only_is_false():
    t1 = tri((0, 0, 0), (1, 0, 0), (0, 1, 0))
    t2 = tri((0, 0, 0), (-1, 0, 0.3), (0, -1, 0.3))
    assert not geom.tri_tri_intersect(t1, t2)


def test_tri_shared_vertex_with_penetration_is_true():
    # Sharing one vertex but slicing through the other's interior.
    t1 = tri((0, 0, 0), (2, 0, 0), (0, 2, 0))
    t2 = tri((0, 0, 0), (1.5, 0.5, -1), (1.5, 0.5, 1))
    assert geom.tri_tri_intersect(t1, t2)


def test_tri_symmetry_fuzz():
    g = rng(3)
    for _ in range(300):
        t1 = g.random((3, 3))
        t2 = g.random((3, 3))
        try:
            a = geom.tri_tri_intersect(t1, t2)
            b = geom.tri_tri_intersect(t2, t1)
        except geom.DegenerateTriangleError:
            continue
        assert a == b


def test_tri_fuzz_against_sat_oracle():
    g = rng(11)
    n = 100_000
    t1 = g.random((n, 3, 3))
    t2 = g.random((n, 3, 3))
    verdict = sat_classify(t1, t2, margin=1e-6)
    a1, b1, c1 = t1[:, 0], t1[:, 1], t1[:, 2]
    a2, b2, c2 = t2[:, 0], t2[:, 1], t2[:, 2]
    area1 = 0.5 * np.linalg.norm(np.cross(b1 - a1, c1 - a1), axis=1)
    area2 = 0.5 * np.linalg.norm(np.cross(b2 - a2, c2 - a2), axis=1)
    usable = (area1 > 1e-6) & (area2 > 1e-6) & (verdict >= 0)
    disagreements = 0
    for i in np.nonzero(usable)[0]:
        got = geom.tri_tri_intersect(t1[i], t2[i])
        if got != bool(verdict[i]):
            disagreements += 1
    assert disagreements == 0
    assert usable.sum() > n * 0.9


# ---------------------------------------------------------------------------
# sample_surface
# ---------------------------------------------------------------------------


def test_sample_single_triangle_on_plane():
    t = np.array([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]], dtype=float)
    ps = geom.sample_surface(t, 1000, seed=5)
    assert len(ps) == 1000
    assert np.all(np.abs(ps.points[:, 2]) < 1e-12)
    assert np.all(ps.points[:, 0] >= -1e-12)
    assert np.all(ps.points[:, 1] >= -1e-12)
    assert np.all(ps.points[:, 0] + ps.points[:, 1] <= 1 + 1e-12)


def test_sample_area_weighting_binomial():
    big = [(0, 0, 0), (3, 0, 0), (0, 6, 0)]  # area 9
    small = [(10, 0, 0), (11, 0, 0), (10, 2, 0)]  # area 1
    mesh = np.array([big, small], dtype=float)
    n = 100_000
    ps = geom.sample_surface(mesh, n, seed=9)
    in_small = np.sum(ps.points[:, 0] >= 5)
    p = 0.1
    sigma = math.sqrt(n * p * (1 - p))
    assert abs(in_small - n * p) < 3 * sigma


def test_sample_deterministic():
    t = np.array([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]], dtype=float)
    a = geom.sample_surface(t, 50, seed=42).points
    b = geom.sample_surface(t, 50, seed=42).points
    assert np.array_equal(a, b)


def test_sample_empty_mesh_raises():
    with pytest.raises(geom.EmptyInputError):
        geom.sample_surface(np.zeros((0, 3, 3)), 10, seed=0)


# ---------------------------------------------------------------------------
# hausdorff distances
# ---------------------------------------------------------------------------


def test_directed_hausdorff_identity():
    x = rng(1).random((20, 3))
    assert geom.directed_hausdorff(x, x) == 0.0


def test_hausdorff_two_point_example():
    x = np.array([[0.0, 0, 0]])
    y = np.array([[1.0, 0, 0], [3.0, 0, 0]])
    assert geom.directed_hausdorff(x, y) == 1.0
    assert geom.directed_hausdorff(y, x) == 3.0
    assert geom.hausdorff(x, y) == 3.0


def test_hausdorff_brute_force_equality():
    g = rng(23)
    for _ in range(100):
        x = g.random((int(g.integers(1, 51)), 3)) * 10
        y = g.random((int(g.integers(1, 51)), 3)) * 10
        assert geom.directed_hausdorff(x, y) == brute_directed_hausdorff(x, y)
        assert geom.hausdorff(x, y) == brute_hausdorff(x, y)


def test_hausdorff_symmetric():
    g = rng(5)
    for _ in range(100):
        x = g.random((10, 3))
        y = g.random((12, 3))
        assert geom.hausdorff(x, y) == geom.hausdorff(y, x)


def test_directed_hausdorff_monotone_under_addition():
    g = rng(6)
    x = g.random((15, 3))
    y = g.random((20, 3))
    base = geom.directed_hausdorff(x, y)
    for _ in range(20):
        extra = g.random((1, 3)) * 2
        assert geom.directed_hausdorff(np.vstack([x, extra]), y) >= base


def test_hausdorff_triangle_inequality():
    g = rng(8)
    for _ in range(50):
        x = g.random((8, 3))
        y = g.random((9, 3))
        z = g.random((10, 3))
        assert geom.hausdorff(x, z) <= geom.hausdorff(x, y) + geom.hausdorff(y, z) + 1e-9


def test_hausdorff_empty_raises():
    with pytest.raises(geom.EmptyInputError):
        geom.directed_hausdorff(np.zeros((0, 3)), np.zeros((1, 3)))


def test_hausdorff_large_sets_kdtree_path():
    g = rng(31)
    x = g.random((300, 3))
    y = g.random((400, 3))
    assert abs(geom.directed_hausdorff(x, y) - brute_directed_hausdorff(x, y)) < 1e-12


# ---------------------------------------------------------------------------
# point_in_closed_mesh
# ---------------------------------------------------------------------------


def unit_cube_mesh(edge=2.0, z0=0.0):
    """Axis-aligned closed cube: [-e/2, e/2]^2 x [z0, z0+e]."""
    h = edge / 2.0
    v = np.array(
        [
            [-h, -h, z0],
            [h, -h, z0],
            [h, h, z0],
            [-h, h, z0],
            [-h, -h, z0 + edge],
            [h, -h, z0 + edge],
            [h, h, z0 + edge],
            [-h, h, z0 + edge],
        ]
    )
    quads = [
        (0, 3, 2, 1),
        (4, 5, 6, 7),
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append([v[a], v[b], v[c]])
        tris.append([v[a], v[c], v[d]])
    return np.array(tris)


def test_point_in_mesh_centroid():
    cube = unit_cube_mesh()
    assert geom.point_in_closed_mesh((0, 0, 1.0), cube)


def test_point_far_outside():
    cube = unit_cube_mesh()
    assert not geom.point_in_closed_mesh((10, 0, 0), cube)


def test_point_on_surface_not_strict_interior():
    cube = unit_cube_mesh()
    assert not geom.point_in_closed_mesh((1.0, 0, 1.0), cube)


def test_point_in_mesh_matches_analytic_box():
    cube = unit_cube_mesh()
    g = rng(17)
    pts = g.random((10_000, 3)) * 4 - 2  # in [-2, 2]^3
    for p in pts:
        analytic = (
            -1 < p[0] < 1 and -1 < p[1] < 1 and 0 < p[2] < 2
        )
        near_surface = (
            min(abs(abs(p[0]) - 1), abs(abs(p[1]) - 1), abs(p[2]), abs(p[2] - 2))
            < 1e-9
        )
        if near_surface:
            continue
        assert geom.point_in_closed_mesh(p, cube) == analytic, p
