import math

import numpy as np
import pytest

from rigidfold import geom, objectives as obj
from rigidfold import pattern


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


class FakeFolded:
    """Just enough of a FoldedState for mesh-driven objectives."""

    def __init__(self, tris):
        self._tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
        self.positions = {0: (0.0, 0.0, 0.0)}

    def mesh(self):
        return self._tris, set()


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------


def test_pyramid_geometry():
    t = obj.build_pyramid()
    assert t.closed
    apex = t.mesh.reshape(-1, 3)[np.argmax(t.mesh.reshape(-1, 3)[:, 2])]
    assert apex[2] == pytest.approx(math.sqrt(8), abs=1e-12)
    base = t.mesh.reshape(-1, 3)
    assert base[:, 0].min() == -2 and base[:, 0].max() == 2
    assert base[:, 1].min() == -2 and base[:, 1].max() == 2
    # Watertight enough for parity: centroid inside, far point outside.
    assert geom.point_in_closed_mesh((0, 0, 0.7), t.mesh)
    assert not geom.point_in_closed_mesh((0, 0, 10.0), t.mesh)


def test_cube_triangle_count_and_volume():
    t = obj.build_cube()
    assert len(t.mesh) == 12
    # Divergence-theorem signed volume.
    vol = 0.0
    for a, b, c in t.mesh:
        vol += np.dot(a, np.cross(b, c)) / 6.0
    assert abs(vol) == pytest.approx(8.0, abs=1e-12)


def test_bowl_profile():
    t = obj.build_bowl()
    assert not t.closed
    pts = t.mesh.reshape(-1, 3)
    r = np.hypot(pts[:, 0], pts[:, 1])
    outer = pts[r > 4.999]
    assert np.allclose(outer[:, 2], 0.2 * 25 - 0.6, atol=1e-9)  # z = 4.4
    rim = pts[np.isclose(r, 1.6)]
    assert np.allclose(rim[:, 2], 0.2 * 1.6**2 - 0.6, atol=1e-9)  # z = -0.088
    center = pts[r < 1e-9]
    assert np.allclose(center[:, 2], 0.2 * 1.6**2 - 0.6, atol=1e-9)


def test_mesh_loader_roundtrip(tmp_path):
    p = tmp_path / "tri.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    t = obj.load_target_mesh(p)
    assert len(t.mesh) == 1
    quad = tmp_path / "quad.obj"
    quad.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    t2 = obj.load_target_mesh(quad)
    assert len(t2.mesh) == 2  # fan split
    a = obj.load_target_mesh(p).samples.points
    b = obj.load_target_mesh(p).samples.points
    assert np.array_equal(a, b)  # fixed-seed determinism


# ---------------------------------------------------------------------------
# Exact point-to-mesh distance
# ---------------------------------------------------------------------------


def closest_dist_reference(p, tri):
    """Independent closest-point via candidate projections."""
    a, b, c = (np.asarray(v, float) for v in tri)
    p = np.asarray(p, float)
    cands = [a, b, c]
    for u, v in [(a, b), (b, c), (c, a)]:
        t = np.dot(p - u, v - u) / np.dot(v - u, v - u)
        cands.append(u + np.clip(t, 0, 1) * (v - u))
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    proj = p - np.dot(p - a, n) * n
    # Barycentric containment of the in-plane projection.
    m = np.array([b - a, c - a]).T
    try:
        uv, *_ = np.linalg.lstsq(m, proj - a, rcond=None)
        if uv[0] >= 0 and uv[1] >= 0 and uv.sum() <= 1:
            cands.append(proj)
    except np.linalg.LinAlgError:
        pass
    return min(np.linalg.norm(p - q) for q in cands)


def test_points_mesh_distance_matches_reference():
    g = rng(3)
    tris = g.random((40, 3, 3)) * 4
    pts = g.random((25, 3)) * 4
    got = geom.points_mesh_distance(pts, tris)
    for i, p in enumerate(pts):
        expect = min(closest_dist_reference(p, t) for t in tris)
        assert got[i] == pytest.approx(expect, abs=1e-9)


# ---------------------------------------------------------------------------
# Shape potential / terminal
# ---------------------------------------------------------------------------


def test_shape_potential_zero_on_surface():
    cube = obj.build_cube()
    seed_corners = np.array(
        [[-1, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0]], dtype=float
    )
    assert obj.shape_potential(cube, seed_corners) == pytest.approx(0.0, abs=1e-12)


def test_shape_potential_monotone_under_vertices():
    cube = obj.build_cube()
    g = rng(5)
    pts = g.random((6, 3)) * 3
    base = obj.shape_potential(cube, pts)
    for _ in range(20):
        extra = g.random((1, 3)) * 5
        combined = np.vstack([pts, extra])
        assert obj.shape_potential(cube, combined) <= base + 1e-12


def test_shape_potential_excludes_enclosed():
    cube = obj.build_cube()
    on_surface = np.array([[1.0, 0.0, 1.0]])
    inside = np.array([[0.0, 0.0, 1.0]])  # strictly interior
    both = np.vstack([on_surface, inside])
    assert obj.shape_potential(cube, both) == pytest.approx(
        obj.shape_potential(cube, on_surface), abs=1e-12
    )


def test_shape_terminal_bounded_by_potential():
    pyr = obj.build_pyramid()
    g = rng(9)
    pts = g.random((8, 3)) * 2
    f = obj.shape_terminal(pyr, pts, pyr.mesh, sample_count=2048, seed=1)
    assert f <= obj.shape_potential(pyr, pts) + 1e-12


def test_shape_terminal_perfect_fold_improves_with_samples():
    pyr = obj.build_pyramid()
    verts = np.array(
        [[2, 2, 0], [-2, 2, 0], [-2, -2, 0], [2, -2, 0], [0, 0, math.sqrt(8)]],
        dtype=float,
    )
    vals = [
        obj.shape_terminal(pyr, verts, pyr.mesh, sample_count=n, seed=3)
        for n in (1024, 16384)
    ]
    assert vals[1] > vals[0]
    assert -0.3 < vals[1] < 0.0


# ---------------------------------------------------------------------------
# Abstract objectives
# ---------------------------------------------------------------------------


def leaf_graph(n_leaves):
    g = pattern.CreaseGraph()
    center = g.add_vertex((0, 0))
    for k in range(n_leaves):
        w = g.add_vertex((k + 1, 0))
        g.add_crease(center, w)
    g.set_mode(center, 1)
    # centre extended so only the ring counts as leaves
    g.verts[center] = g.verts[center]._replace(extended=True)
    return g, list(range(1, n_leaves + 1))


def test_bucket_flat_sheet_zero():
    g, leaves = leaf_graph(4)
    pos = np.zeros((5, 3))
    pos[1:, 0] = [1, -1, 1, -1]
    pos[1:, 1] = [1, 1, -1, -1]
    assert obj.BucketObjective().terminal(g, None, pos) == 0.0


def test_bucket_symmetric_cone_rim_height():
    g, leaves = leaf_graph(4)
    h = 1.75
    pos = np.zeros((5, 3))
    pos[1:] = [[1, 1, h], [-1, 1, h], [-1, -1, h], [1, -1, h]]
    assert obj.BucketObjective().terminal(g, None, pos) == pytest.approx(h)


def test_bucket_lopsided_discard():
    g, leaves = leaf_graph(4)
    pos = np.zeros((5, 3))
    pos[1:] = [[1, 1, 0.5], [-1, 1, 2.0], [-1, -1, 0.5], [1, -1, 0.5]]
    assert obj.BucketObjective().terminal(g, None, pos) == obj.DISCARD_VALUE


def test_shelf_flat_sheet_discarded():
    plates = [[(0, 0, 0), (1, 0, 0), (1, 1, 0)], [(0, 0, 0), (1, 1, 0), (0, 1, 0)]]
    f = FakeFolded(plates)
    got = obj.ShelfObjective().terminal(None, f, np.zeros((1, 3)))
    assert got == obj.DISCARD_VALUE


def stacked_plates(n=3):
    tris = []
    for k in range(n):
        z = float(k)
        tris.append([(0, 0, z), (1, 0, z), (1, 1, z)])
        tris.append([(0, 0, z), (1, 1, z), (0, 1, z)])
    return np.array(tris, float)


def test_shelf_three_stacked_unit_plates():
    f = FakeFolded(stacked_plates(3))
    got = obj.ShelfObjective().terminal(None, f, np.zeros((1, 3)))
    assert got == pytest.approx(1.0, abs=1e-12)


def test_shelf_rigid_rotation_invariant():
    tris = stacked_plates(3)
    base = obj.ShelfObjective().terminal(None, FakeFolded(tris), np.zeros((1, 3)))
    ang = 0.7
    r = np.array(
        [
            [math.cos(ang), 0, -math.sin(ang)],
            [0, 1, 0],
            [math.sin(ang), 0, math.cos(ang)],
        ]
    )
    rotated = tris @ r.T
    got = obj.ShelfObjective().terminal(None, FakeFolded(rotated), np.zeros((1, 3)))
    assert got == pytest.approx(base, abs=1e-9)


def test_table_optimum_and_flat():
    t = obj.TableObjective()
    pos = np.zeros((10, 3))
    pos[:4, 2] = 2.5
    assert t.terminal(None, None, pos) == pytest.approx(0.0, abs=1e-12)
    flat = np.zeros((10, 3))
    assert t.terminal(None, None, flat) == pytest.approx(-2.5, abs=1e-12)


def test_table_permutation_invariant():
    t = obj.TableObjective()
    g = rng(2)
    pos = g.random((12, 3)) * 3
    base = t.terminal(None, None, pos)
    perm = pos[g.permutation(12)]
    assert t.terminal(None, None, perm) == pytest.approx(base, abs=1e-12)


def ideal_chair_positions():
    pos = [
        [1, 2.1, -4],
        [-1, 2.1, -4],
        [0, -2.1, -4],  # legs on both sides
        [1, 1, 0],
        [-1, -1, 0],  # seat
        [0.5, 2.1, 4],
        [-0.5, -2.1, 3],  # backrest, top at z=4
    ]
    return np.array(pos, float)


def test_chair_ideal_zero():
    c = obj.ChairObjective()
    assert c.terminal(None, None, ideal_chair_positions()) == pytest.approx(0.0, abs=1e-12)


def test_chair_flat_sheet_penalised():
    c = obj.ChairObjective()
    pos = np.array([[1, 1, 0], [-1, 1, 0], [1, -1, 0], [-1, -1, 0]], float)
    got = c.terminal(None, None, pos)
    assert got < -3.0  # heavy penalty, legs are 4 away from target


def test_chair_out_of_bounds_discard():
    c = obj.ChairObjective()
    pos = ideal_chair_positions()
    pos[0, 0] = 5.0
    assert c.terminal(None, None, pos) == obj.DISCARD_VALUE


def test_chair_one_sided_legs_discard():
    c = obj.ChairObjective()
    pos = ideal_chair_positions()
    pos[2, 1] = 2.1  # all legs now on the +y side
    assert c.terminal(None, None, pos) == obj.DISCARD_VALUE


def chair_reference(points):
    """Independent evaluation of the chair formulas."""
    pts = sorted(range(len(points)), key=lambda i: (points[i][2], i))
    legs = pts[:3]
    l_legs = sum(
        abs(points[i][2] + 4) + abs(abs(points[i][1]) - 2.1) for i in legs
    ) / 3.0
    zmax = max(p[2] for p in points)
    above = [p for p in points if p[2] > 0]
    l_rest = abs(zmax - 4)
    if above:
        l_rest += sum(abs(abs(p[1]) - 2.1) for p in above) / len(above)
    return -l_legs - l_rest


def table_reference(points):
    zs = sorted(((p[2], i) for i, p in enumerate(points)), key=lambda t: (-t[0], t[1]))
    top = [z for z, _ in zs[:4]]
    rest = [z for z, _ in zs[4:]]
    f = -sum(abs(z - 2.5) for z in top) / 4.0
    if rest:
        f -= sum(abs(z) for z in rest) / len(rest)
    return f


def test_chair_and_table_formulas_against_reference():
    g = rng(31)
    chair = obj.ChairObjective()
    table = obj.TableObjective()
    checked_chair = 0
    for _ in range(100):
        n = int(g.integers(5, 15))
        pos = (g.random((n, 3)) * 2 - 1) * 3.5
        assert table.terminal(None, None, pos) == pytest.approx(
            table_reference(pos), abs=1e-12
        )
        # Make the set pass the chair's validity filters: near-equal lowest
        # three points with legs on both sides.
        order = np.argsort(pos[:, 2], kind="stable")
        base = pos[order[0], 2]
        pos[order[:3], 2] = base + g.random(3) * 0.25
        pos[order[0], 1] = abs(pos[order[0], 1]) + 0.1
        pos[order[1], 1] = -abs(pos[order[1], 1]) - 0.1
        pos = np.clip(pos, -3.9, 3.9)
        got = chair.terminal(None, None, pos)
        if got != obj.DISCARD_VALUE:
            checked_chair += 1
            assert got == pytest.approx(chair_reference(pos), abs=1e-12)
    assert checked_chair > 80


def test_discard_value_is_large_negative_constant():
    assert obj.DISCARD_VALUE == -1.0e6


def test_coverage_distance_equals_directed_hausdorff():
    # The cluster-pruned evaluation must agree exactly with the plain op.
    pyr = obj.build_pyramid()
    g = rng(77)
    for _ in range(5):
        x = g.random((3000, 3)) * 6 - 3
        got = pyr.coverage_distance(x)
        ref = geom.directed_hausdorff(pyr.samples.points, x)
        assert got == pytest.approx(ref, abs=1e-12)


def test_convex_containment_matches_parity():
    cube = obj.build_cube()
    assert cube.convex
    g = rng(78)
    pts = g.random((3000, 3)) * 4 - 2
    fast = cube.contains_batch(pts)
    slow = np.array([geom.point_in_closed_mesh(p, cube.mesh) for p in pts])
    # Differences allowed only within 2e-9 of the surface.
    diff = np.nonzero(fast != slow)[0]
    for i in diff:
        assert geom.points_mesh_distance(pts[i : i + 1], cube.mesh)[0] < 2e-9
