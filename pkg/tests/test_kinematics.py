import math

import numpy as np
import pytest

from rigidfold import kinematics as kin
from rigidfold import pattern
from rigidfold.pattern import Board

from oracles import loop_closure_residual, rot_x, rot_z


def extend(graph, vid, cells, mode=1):
    """Test helper: extend a vertex with three outgoing creases."""
    graph.set_mode(vid, mode)
    for cell in cells:
        w = graph.cell2vid.get(tuple(cell))
        if w is None:
            w = graph.add_vertex(cell)
        graph.add_crease(vid, w)
    graph.set_extended(vid)
    return graph


def fan_rho_ccw(graph, folded, vid):
    """(sectors, dihedrals) of a vertex fan in CCW order, for the oracle."""
    fan = graph.incident_sorted(vid)
    sectors = kin.sector_angles(graph, vid)
    rho = [folded.rho[c.id] for c, _, _ in fan]
    return sectors, rho


# ---------------------------------------------------------------------------
# sector angles
# ---------------------------------------------------------------------------


def test_sector_angles_axis_aligned():
    g = pattern.CreaseGraph()
    v = g.add_vertex((4, 4))
    for cell in [(6, 4), (4, 6), (2, 4), (4, 2)]:
        w = g.add_vertex(cell)
        g.add_crease(v, w)
    assert kin.sector_angles(g, v) == pytest.approx([math.pi / 2] * 4)


def test_sector_angles_mixed_degree_4():
    # Creases at 0, 60, 180, 270 degrees: sectors pi/3, 2pi/3, pi/2, pi/2.
    g = pattern.CreaseGraph()
    v = g.add_vertex((0, 0))
    for cell in [(2, 0), (1, 2), (-2, 0), (0, -2)]:
        w = g.add_vertex(cell)
        g.add_crease(v, w)
    angs = kin.sector_angles(g, v)
    expected = [math.atan2(2, 1), math.pi - math.atan2(2, 1), math.pi / 2, math.pi / 2]
    assert angs == pytest.approx(expected)
    assert sum(angs) == pytest.approx(2 * math.pi, abs=1e-12)


def test_sector_angles_sum_fuzz():
    rng = np.random.Generator(np.random.PCG64(2))
    for _ in range(50):
        g = pattern.CreaseGraph()
        v = g.add_vertex((0, 0))
        cells = set()
        while len(cells) < 5:
            c = (int(rng.integers(-5, 6)), int(rng.integers(-5, 6)))
            if c != (0, 0):
                cells.add(c)
        angles = {math.atan2(c[1], c[0]) % (2 * math.pi) for c in cells}
        if len(angles) < len(cells):
            continue  # collinear duplicates not allowed in real graphs
        for c in cells:
            w = g.add_vertex(c)
            g.add_crease(v, w)
        assert sum(kin.sector_angles(g, v)) == pytest.approx(2 * math.pi, abs=1e-12)


def test_sector_angles_isolated_vertex():
    g = pattern.CreaseGraph()
    v = g.add_vertex((0, 0))
    with pytest.raises(kin.IsolatedVertexError):
        kin.sector_angles(g, v)


# ---------------------------------------------------------------------------
# spherical triangle inequality
# ---------------------------------------------------------------------------


def test_triangle_ok_equilateral():
    assert kin.spherical_triangle_ok((math.pi / 2, math.pi / 2, math.pi / 2))


def test_triangle_not_ok():
    assert not kin.spherical_triangle_ok((0.1, 0.1, 1.0))


def test_triangle_boundary_non_strict():
    assert kin.spherical_triangle_ok((0.5, 0.5, 1.0))


# ---------------------------------------------------------------------------
# solve_vertex against the loop-closure oracle
# ---------------------------------------------------------------------------


def closure_from_solution(sectors, outgoing, incoming_rho, out_rho):
    rho = []
    it_in = iter(incoming_rho)
    it_out = iter(out_rho)
    for o in outgoing:
        rho.append(next(it_out) if o else next(it_in))
    return loop_closure_residual(sectors, rho)


def test_solve_flat_identity():
    sectors = [math.pi / 2] * 4
    outgoing = [True, True, True, False]
    out = kin.solve_vertex(sectors, outgoing, [0.0], mode=1)
    assert out == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_solve_degree_4_closure_and_modes():
    # Fig-2 style vertex: one incoming crease, three outgoing.
    sectors = [1.1, 1.9, 0.9, 2 * math.pi - 3.9]
    outgoing = [True, True, True, False]
    sols = {}
    for mode in (-1, 1):
        out = kin.solve_vertex(sectors, outgoing, [1.2], mode=mode)
        res = closure_from_solution(sectors, outgoing, [1.2], out)
        assert res <= 1e-9
        sols[mode] = out
    assert sols[1] != pytest.approx(sols[-1])  # two distinct roots


def test_solve_fuzz_closure():
    rng = np.random.Generator(np.random.PCG64(11))
    solved = 0
    for _ in range(400):
        deg = int(rng.integers(4, 8))
        cuts = np.sort(rng.random(deg - 1)) * 2 * math.pi
        sectors = np.diff(np.concatenate([[0.0], cuts, [2 * math.pi]])).tolist()
        if min(sectors) < 0.05:
            continue
        out_pos = sorted(rng.choice(deg, size=3, replace=False).tolist())
        outgoing = [k in out_pos for k in range(deg)]
        incoming = (rng.random(deg - 3) * 2 - 1) * 1.5
        try:
            out = kin.solve_vertex(sectors, outgoing, incoming.tolist(), mode=1)
        except kin.FoldInfeasibleError:
            continue
        solved += 1
        res = closure_from_solution(sectors, outgoing, incoming.tolist(), out)
        assert res <= 1e-9, (sectors, outgoing, incoming, out)
        assert all(-math.pi <= r <= math.pi for r in out)
    assert solved > 100


def test_solve_mode_flip_both_roots_close():
    rng = np.random.Generator(np.random.PCG64(13))
    both = 0
    for _ in range(200):
        cuts = np.sort(rng.random(4)) * 2 * math.pi
        sectors = np.diff(np.concatenate([[0.0], cuts, [2 * math.pi]])).tolist()
        if min(sectors) < 0.1:
            continue
        outgoing = [True, False, True, True, False]
        incoming = (rng.random(2) * 2 - 1) * 1.2
        try:
            a = kin.solve_vertex(sectors, outgoing, incoming.tolist(), mode=1)
            b = kin.solve_vertex(sectors, outgoing, incoming.tolist(), mode=-1)
        except kin.FoldInfeasibleError:
            continue
        for out in (a, b):
            assert closure_from_solution(sectors, outgoing, incoming.tolist(), out) <= 1e-9
        both += 1
    assert both > 50


# ---------------------------------------------------------------------------
# unit angles
# ---------------------------------------------------------------------------


def test_unit_angles_flat_equals_planar_gaps():
    # Flat incoming fan: unit angles are the planar angles between outgoing
    # creases (wrapped to [0, pi]).
    sectors = [0.9, 0.7, 1.1, 0.8, 2 * math.pi - 3.5]
    outgoing = [True, False, True, True, False]
    us = kin.unit_angles_from_fan(sectors, outgoing, [0.0, 0.0])
    spans = [0.9 + 0.7, 1.1, 0.8 + (2 * math.pi - 3.5)]
    expect = [s if s <= math.pi else 2 * math.pi - s for s in spans]
    assert list(us) == pytest.approx(expect, abs=1e-12)


def test_unit_angles_degree_3_source():
    sectors = [2.0, 2.2, 2 * math.pi - 4.2]
    outgoing = [True, True, True]
    us = kin.unit_angles_from_fan(sectors, outgoing, [])
    expect = [s if s <= math.pi else 2 * math.pi - s for s in sectors]
    assert list(us) == pytest.approx(expect, abs=1e-12)


def test_unit_angles_degree_5_rotation_oracle():
    # Fold the incoming fan explicitly with rotation matrices and measure the
    # arcs between the outgoing directions.
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(50):
        cuts = np.sort(rng.random(4)) * 2 * math.pi
        sectors = np.diff(np.concatenate([[0.0], cuts, [2 * math.pi]]))
        if sectors.min() < 0.1:
            continue
        outgoing = [False, True, False, True, True]
        rho_in = ((rng.random(2) * 2 - 1) * 1.3).tolist()
        us = kin.unit_angles_from_fan(sectors.tolist(), outgoing, rho_in)

        # Oracle: explicit rotation walk starting at the first outgoing
        # crease, folding the known creases as they are crossed.  The wrap
        # chain's far endpoint is where the walk lands after the full turn.
        rho_seq = []
        it = iter(rho_in)
        for o in outgoing:
            rho_seq.append(None if o else next(it))
        first = outgoing.index(True)
        frame = np.eye(3)
        x = np.array([1.0, 0, 0])
        out_dirs = [frame @ x]
        for step in range(5):
            k = (first + step) % 5
            frame = frame @ rot_z(sectors[k])
            nxt = (k + 1) % 5
            if step < 4:
                if rho_seq[nxt] is None:
                    out_dirs.append(frame @ x)
                else:
                    frame = frame @ rot_x(rho_seq[nxt])
        wrap_end = frame @ x
        expect = []
        for k in range(3):
            d1 = out_dirs[k]
            d2 = out_dirs[k + 1] if k < 2 else wrap_end
            expect.append(
                math.atan2(np.linalg.norm(np.cross(d1, d2)), float(np.dot(d1, d2)))
            )
        assert list(us) == pytest.approx(expect, abs=1e-9)


# ---------------------------------------------------------------------------
# graph-level folding
# ---------------------------------------------------------------------------


def seeded_square_graph(half=2):
    board = Board(9, 9)
    return board, pattern.seed_square(board, half, center=(4, 4))


def test_fold_flat_graph_is_planar():
    board, g = seeded_square_graph()
    extend(g, 0, [(1, 1), (4, 0), (0, 4)])
    folded = kin.fold_graph(g, 0.0)
    for v in g.verts:
        x, y, z = folded.positions[v.id]
        assert z == 0.0  # exact flat-state identity
        assert (x, y) == pytest.approx(v.pos, abs=1e-12)
    assert all(r == 0.0 or r is None for r in folded.rho)


def test_fold_preserves_crease_lengths():
    board, g = seeded_square_graph()
    extend(g, 0, [(1, 1), (4, 0), (0, 4)])
    extend(g, 1, [(7, 1), (4, 1), (8, 4)], mode=-1)
    for rho0 in np.linspace(0.15, 2.8, 7):
        try:
            folded = kin.fold_graph(g, float(rho0))
        except kin.FoldInfeasibleError:
            continue
        for c in g.creases:
            p = np.array(folded.positions[c.u])
            q = np.array(folded.positions[c.v])
            planar = math.dist(g.verts[c.u].pos, g.verts[c.v].pos)
            assert abs(np.linalg.norm(p - q) - planar) <= 1e-9


def test_fold_loop_closure_at_extended_vertices():
    board, g = seeded_square_graph()
    extend(g, 0, [(1, 1), (4, 0), (0, 4)])
    extend(g, 2, [(7, 7), (4, 8), (8, 4)], mode=-1)
    for rho0 in np.linspace(0.1, 2.5, 5):
        try:
            folded = kin.fold_graph(g, float(rho0))
        except kin.FoldInfeasibleError:
            continue
        for vid in g.ext_order:
            sectors, rho = fan_rho_ccw(g, folded, vid)
            assert loop_closure_residual(sectors, rho) <= 1e-9


def test_fold_panel_angles_preserved():
    board, g = seeded_square_graph()
    extend(g, 0, [(1, 1), (4, 0), (0, 4)])
    folded = kin.fold_graph(g, 1.0)
    plan = kin.build_plan(g)
    for face in plan.faces:
        pts_flat = [np.array([*g.verts[v].pos, 0.0]) for v in face]
        pts_fold = [np.array(folded.positions[v]) for v in face]
        for k in range(len(face)):
            a_f = pts_flat[k - 1] - pts_flat[k]
            b_f = pts_flat[(k + 1) % len(face)] - pts_flat[k]
            a_d = pts_fold[k - 1] - pts_fold[k]
            b_d = pts_fold[(k + 1) % len(face)] - pts_fold[k]
            ang_f = math.atan2(np.linalg.norm(np.cross(a_f, b_f)), float(np.dot(a_f, b_f)))
            ang_d = math.atan2(np.linalg.norm(np.cross(a_d, b_d)), float(np.dot(a_d, b_d)))
            assert abs(ang_f - ang_d) <= 1e-9


def test_fold_deterministic():
    board, g = seeded_square_graph()
    extend(g, 0, [(1, 1), (4, 0), (0, 4)])
    a = kin.fold_graph(g, 1.3)
    b = kin.fold_graph(g, 1.3)
    assert a.positions == b.positions
    assert a.rho == b.rho


def test_single_crease_seed_folds():
    board = Board(25, 25)
    g = pattern.seed_single_crease(board, (10, 12), (14, 12))
    extend(g, 0, [(8, 10), (6, 12), (8, 14)])
    folded = kin.fold_graph(g, 1.0)
    # Rigidity across the driven crease.
    p = np.array(folded.positions[0])
    q = np.array(folded.positions[1])
    assert np.linalg.norm(p - q) == pytest.approx(4.0, abs=1e-9)
    sectors, rho = fan_rho_ccw(g, folded, 0)
    assert loop_closure_residual(sectors, rho) <= 1e-9


def test_motion_collision_free_flat_square():
    board, g = seeded_square_graph()
    assert kin.motion_collision_free(g, 2.0, sweep_steps=5)


def test_mirrored_vertices_same_mode_fold_symmetrically():
    # Mirror-image vertices extended with the SAME rigid body mode produce a
    # mirror-symmetric folded shape; this is the convention the environment's
    # action mirroring relies on.
    board = Board(9, 9, {"x", "y"})
    g = pattern.seed_square(board, 2, center=(4, 4))
    eps = [(0, 1), (3, 0), (1, 3)]
    refl_i = lambda c: (8 - c[0], c[1])
    refl_j = lambda c: (c[0], 8 - c[1])
    plans = [
        (0, eps),
        (1, [refl_i(c) for c in eps]),
        (3, [refl_j(c) for c in eps]),
        (2, [refl_i(refl_j(c)) for c in eps]),
    ]
    for vid, cells in plans:
        extend(g, vid, cells, mode=-1)
    folded = kin.fold_graph(g, 1.4)
    by_cell = {g.verts[v.id].pos: np.array(folded.positions[v.id]) for v in g.verts}
    for cell, p in by_cell.items():
        for mc, mp in (
            (refl_i(cell), np.array([8 - p[0], p[1], p[2]])),
            (refl_j(cell), np.array([p[0], 8 - p[1], p[2]])),
        ):
            assert np.abs(by_cell[mc] - mp).max() < 1e-12
