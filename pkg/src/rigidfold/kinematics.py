"""Forward kinematics for the crease graph.

Each extended vertex has exactly three outgoing creases with unknown dihedral
angles and delta-3 incident creases whose angles are already known.  Folding
the known fan leaves the three outgoing directions spanning a spherical
triangle; placing that triangle (two mirror placements, selected by the rigid
body mode) determines the outgoing angles.  Vertices are solved in extension
order, which is always a valid topological order, and 3D positions propagate
from the anchored seed panel outward.

Matrices are 3x3 tuples of rows; the hot path avoids numpy call overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .pattern import CreaseGraph, bounded_faces, fan_triangulate

TWO_PI = 2.0 * math.pi
IDENT = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
# Residual/consistency tolerance for a valid rigid fold.
CONSIST_TOL = 1e-8
# Non-strict spherical triangle inequality slack.
TRIANGLE_SLACK = 1e-9


class KinematicsError(ValueError):
    pass


class IsolatedVertexError(KinematicsError):
    pass


class FoldInfeasibleError(KinematicsError):
    """Raised when a graph cannot fold rigidly at the requested angle."""

    def __init__(self, vertex, reason):
        self.vertex = vertex
        self.reason = reason
        super().__init__(f"vertex {vertex}: {reason}")


# ---------------------------------------------------------------------------
# Small matrix kernel (tuples of rows)
# ---------------------------------------------------------------------------


def mul_rz(m, ang):
    """m @ Rz(ang)."""
    c, s = math.cos(ang), math.sin(ang)
    (a, b, e), (f, g, h), (p, q, r) = m
    return (
        (a * c + b * s, b * c - a * s, e),
        (f * c + g * s, g * c - f * s, h),
        (p * c + q * s, q * c - p * s, r),
    )


def mul_rx(m, ang):
    """m @ Rx(ang)."""
    c, s = math.cos(ang), math.sin(ang)
    (a, b, e), (f, g, h), (p, q, r) = m
    return (
        (a, b * c + e * s, e * c - b * s),
        (f, g * c + h * s, h * c - g * s),
        (p, q * c + r * s, r * c - q * s),
    )


def mat_mul(m, n):
    (a, b, c), (d, e, f), (g, h, i) = m
    (j, k, l), (p, q, r), (s, t, u) = n
    return (
        (a * j + b * p + c * s, a * k + b * q + c * t, a * l + b * r + c * u),
        (d * j + e * p + f * s, d * k + e * q + f * t, d * l + e * r + f * u),
        (g * j + h * p + i * s, g * k + h * q + i * t, g * l + h * r + i * u),
    )


def mat_col(m, k):
    return (m[0][k], m[1][k], m[2][k])


def mat_diff(m, n):
    return max(
        abs(m[i][j] - n[i][j]) for i in range(3) for j in range(3)
    )


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _norm(u):
    return math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])


def _rot_from_pairs(v_end, e_start, e_end):
    """Rotation G with G x = e_start and G v_end = e_end (angles must match)."""
    ny = math.hypot(v_end[1], v_end[2])
    if ny < 1e-12:
        raise ValueError("degenerate chain span")
    b2 = (0.0, v_end[1] / ny, v_end[2] / ny)
    b3 = (0.0, -b2[2], b2[1])  # x-hat cross b2
    d = _dot(e_end, e_start)
    t2 = (e_end[0] - d * e_start[0], e_end[1] - d * e_start[1], e_end[2] - d * e_start[2])
    n2 = _norm(t2)
    if n2 < 1e-12:
        raise ValueError("degenerate triangle corner")
    t2 = (t2[0] / n2, t2[1] / n2, t2[2] / n2)
    t3 = _cross(e_start, t2)
    # G = e_start (x) b1^T + t2 (x) b2^T + t3 (x) b3^T  with b1 = x-hat
    rows = []
    for i in range(3):
        rows.append(
            (
                e_start[i],
                t2[i] * b2[1] + t3[i] * b3[1],
                t2[i] * b2[2] + t3[i] * b3[2],
            )
        )
    return tuple(rows)


# ---------------------------------------------------------------------------
# Sector and unit angles
# ---------------------------------------------------------------------------


def sector_angles(graph: CreaseGraph, vid: int) -> list:
    """CCW planar angles between consecutive incident creases; sums to 2pi."""
    fan = graph.incident_sorted(vid)
    if not fan:
        raise IsolatedVertexError(f"vertex {vid} has no incident creases")
    angs = [a for _, _, a in fan]
    out = []
    for k in range(len(angs)):
        nxt = angs[(k + 1) % len(angs)]
        out.append((nxt - angs[k]) % TWO_PI if len(angs) > 1 else TWO_PI)
    return out


def _chain_products(sectors, outgoing, rho_in):
    """Chain matrices between consecutive outgoing creases.

    sectors/outgoing are CCW-ordered with outgoing[0] True; rho_in maps the
    non-outgoing fan positions (in CCW order) to their known dihedral angles.
    Returns (chains C_k, end directions v_k, unit angles U_k).
    """
    n = len(sectors)
    outs = [i for i in range(n) if outgoing[i]]
    if len(outs) != 3 or outs[0] != 0:
        raise ValueError("fan must start at the first of three outgoing creases")
    chains = []
    for k in range(3):
        start = outs[k]
        end = outs[(k + 1) % 3] if k < 2 else n
        m = IDENT
        i = start
        while i < end:
            m = mul_rz(m, sectors[i])
            nxt = (i + 1) % n
            if nxt != outs[(k + 1) % 3]:
                m = mul_rx(m, rho_in[nxt])
            i += 1
        chains.append(m)
    vs = [mat_col(c, 0) for c in chains]
    us = [math.atan2(math.hypot(v[1], v[2]), v[0]) for v in vs]
    return chains, vs, us


def unit_angles_from_fan(sectors, outgoing, incoming_rho) -> tuple:
    """Spherical-triangle side lengths for a fan given known incoming angles."""
    sec, outg, rho_map = _rotate_fan(sectors, outgoing, incoming_rho)
    _, _, us = _chain_products(sec, outg, rho_map)
    return tuple(us)


def _rotate_fan(sectors, outgoing, incoming_rho):
    n = len(sectors)
    outs = [i for i in range(n) if outgoing[i]]
    if len(outs) != 3:
        raise ValueError("exactly three outgoing creases required")
    r = outs[0]
    sec = [sectors[(r + i) % n] for i in range(n)]
    outg = [outgoing[(r + i) % n] for i in range(n)]
    rho_full = [None] * n
    it = iter(incoming_rho)
    for i in range(n):
        if not outgoing[i]:
            rho_full[i] = next(it)
    rho_rot = [rho_full[(r + i) % n] for i in range(n)]
    return sec, outg, rho_rot


def unit_angles(graph: CreaseGraph, vid: int, partial_rho: dict) -> tuple:
    """Unit angles of vertex vid given already-solved incoming dihedrals."""
    fan = graph.incident_sorted(vid)
    sectors = sector_angles(graph, vid)
    outgoing = []
    incoming = []
    for c, _, _ in fan:
        is_out = c.u == vid and not c.is_seed
        outgoing.append(is_out)
        if not is_out:
            if c.id not in partial_rho:
                raise KinematicsError(f"incoming crease {c.id} not solved yet")
            incoming.append(partial_rho[c.id])
    return unit_angles_from_fan(sectors, outgoing, incoming)


def spherical_triangle_ok(us) -> bool:
    """Non-strict triangle inequality on the three unit angles."""
    a, b, c = sorted(us)
    return a + b >= c - TRIANGLE_SLACK


def solve_vertex(sectors, outgoing, incoming_rho, mode: int) -> list:
    """Outgoing dihedral angles of one vertex.

    sectors[i] is the CCW angle between crease i and crease i+1; outgoing
    flags the three unknown creases; incoming_rho lists the known dihedrals of
    the remaining creases in CCW order.  mode in {-1, +1} picks between the
    two mirror placements of the spherical triangle.  Returns the three
    outgoing angles in CCW fan order.
    """
    if all(r == 0.0 for r in incoming_rho):
        # Flat fan: the sheet's singular configuration.  The flat closure is
        # always valid and is the branch continuous with the unfolded sheet.
        return [0.0, 0.0, 0.0]
    sec, outg, rho_rot = _rotate_fan(sectors, outgoing, incoming_rho)
    chains, vs, us = _chain_products(sec, outg, rho_rot)
    u1, u2, u3 = us
    if min(us) < 1e-9:
        raise FoldInfeasibleError("?", "coincident outgoing creases")
    s1 = math.sin(u1)
    if s1 < 1e-12:
        raise FoldInfeasibleError("?", "degenerate unit angle")
    c1, c2, c3 = math.cos(u1), math.cos(u2), math.cos(u3)
    e1 = (1.0, 0.0, 0.0)
    e2 = (c1, s1, 0.0)
    y3 = (c2 - c1 * c3) / s1
    z3sq = 1.0 - c3 * c3 - y3 * y3
    if z3sq < -TRIANGLE_SLACK:
        raise FoldInfeasibleError("?", "spherical triangle inequality violated")
    z3 = mode * math.sqrt(max(z3sq, 0.0))
    e3 = (c3, y3, z3)
    corners = (e1, e2, e3)
    try:
        gs = [
            _rot_from_pairs(vs[k], corners[k], corners[(k + 1) % 3]) for k in range(3)
        ]
    except ValueError as err:
        raise FoldInfeasibleError("?", str(err))
    rhos = []
    for k in range(3):
        prev = (k - 1) % 3
        e_prev = mat_mul(gs[prev], chains[prev])
        s_arr = mat_col(e_prev, 1)
        s_arr = (-s_arr[0], -s_arr[1], -s_arr[2])
        s_dep = mat_col(gs[k], 1)
        phi = math.atan2(_dot(corners[k], _cross(s_arr, s_dep)), _dot(s_arr, s_dep))
        rhos.append(math.remainder(phi + math.pi, TWO_PI))
    # Angles for the outgoing creases in their CCW fan order.
    return rhos


# ---------------------------------------------------------------------------
# Fold plan: per-topology preprocessing
# ---------------------------------------------------------------------------


@dataclass
class _VertexPlan:
    vid: int
    fan_cids: list  # crease ids in CCW fan order
    fan_other: list  # far vertex per fan entry
    fan_from_self: list  # crease originates at this vertex
    sectors: list  # CCW sector angles
    outgoing: list  # bool per fan entry
    incoming_idx: list  # fan positions of incoming creases


@dataclass
class _RingStep:
    corner: int
    in_cid: int
    out_cid: int
    next_corner: int
    interior: list  # (cid, angle offset from the outgoing ring edge), sorted
    span: float  # interior cone angle


def _flip_end(frame, rho):
    """Frame of the same crease based at its other endpoint (involutive)."""
    return mul_rz(mul_rx(frame, -rho), math.pi)


class FoldPlan:
    """Cached per-topology folding recipe for one crease graph."""

    def __init__(self, graph: CreaseGraph):
        self.graph = graph
        self.version = graph.version
        self.n_creases = len(graph.creases)
        self.seed_cids = [c.id for c in graph.creases if c.is_seed]
        self.lengths = {}
        for c in graph.creases:
            (x1, y1), (x2, y2) = graph.verts[c.u].pos, graph.verts[c.v].pos
            self.lengths[c.id] = math.hypot(x2 - x1, y2 - y1)
        self.vplans = [self._vertex_plan(v) for v in graph.ext_order]
        self._build_anchors()
        self._build_mesh_topology()

    # -- preprocessing ------------------------------------------------------

    def _vertex_plan(self, vid):
        g = self.graph
        fan = g.incident_sorted(vid)
        angs = [a for _, _, a in fan]
        sectors = [
            (angs[(k + 1) % len(angs)] - angs[k]) % TWO_PI for k in range(len(angs))
        ]
        outgoing = [c.u == vid and not c.is_seed for c, _, _ in fan]
        if all(outgoing):
            raise KinematicsError(f"extended vertex {vid} has no incoming crease")
        return _VertexPlan(
            vid=vid,
            fan_cids=[c.id for c, _, _ in fan],
            fan_other=[other for _, other, _ in fan],
            fan_from_self=[c.u == vid for c, _, _ in fan],
            sectors=sectors,
            outgoing=outgoing,
            incoming_idx=[i for i, o in enumerate(outgoing) if not o],
        )

    def _build_anchors(self):
        """One anchored crease per seed ring (and per bare seed crease).

        The anchor crease lies along its planar direction with the sector on
        its CCW side flat; everything else, including a possibly subdivided
        ring interior, is propagated.  Ring walks transport frames around the
        polygon through the interior-side creases at unextended corners.
        """
        g = self.graph
        self.anchors = []  # (cid, planar frame, u, pos_u, v, pos_v)
        self.ring_walks = []

        def planar_frame(cid):
            c = g.creases[cid]
            (x1, y1), (x2, y2) = g.verts[c.u].pos, g.verts[c.v].pos
            return mul_rz(IDENT, math.atan2(y2 - y1, x2 - x1))

        def anchor(cid):
            c = g.creases[cid]
            (x1, y1), (x2, y2) = g.verts[c.u].pos, g.verts[c.v].pos
            self.anchors.append(
                (
                    cid,
                    planar_frame(cid),
                    c.u,
                    (float(x1), float(y1), 0.0),
                    c.v,
                    (float(x2), float(y2), 0.0),
                )
            )

        for ring in g.rings:
            e0 = min(ring.crease_ids)
            anchor(e0)
            if len(ring.vertex_ids) >= 3:
                self.ring_walks.append(self._ring_walk(ring, e0))
        if g.anchor is not None and g.anchor[0] == "crease":
            anchor(g.anchor[1])

    def _ring_walk(self, ring, e0):
        """Corner-to-corner transport steps, starting at the anchored crease."""
        g = self.graph
        ids = list(ring.vertex_ids)  # CCW polygon order
        m = len(ids)
        edge_of = {}
        for cid in ring.crease_ids:
            c = g.creases[cid]
            edge_of[frozenset((c.u, c.v))] = cid
        c0 = g.creases[e0]
        i = next(
            k
            for k in range(m)
            if frozenset((ids[k], ids[(k + 1) % m])) == frozenset((c0.u, c0.v))
        )
        steps = []
        for k in range(1, m):
            w = ids[(i + k) % m]
            prev = ids[(i + k - 1) % m]
            nxt = ids[(i + k + 1) % m]
            in_cid = edge_of[frozenset((prev, w))]
            out_cid = edge_of[frozenset((w, nxt))]
            wx, wy = g.verts[w].pos
            th_in = math.atan2(
                g.verts[prev].pos[1] - wy, g.verts[prev].pos[0] - wx
            ) % TWO_PI
            th_out = math.atan2(
                g.verts[nxt].pos[1] - wy, g.verts[nxt].pos[0] - wx
            ) % TWO_PI
            span = (th_in - th_out) % TWO_PI
            interior = []
            for c, other, ang in g.incident_sorted(w):
                if c.id in (in_cid, out_cid):
                    continue
                off = (ang - th_out) % TWO_PI
                if 0 < off < span:
                    interior.append((c.id, off))
            interior.sort(key=lambda t: t[1])
            steps.append(
                _RingStep(
                    corner=w,
                    in_cid=in_cid,
                    out_cid=out_cid,
                    next_corner=nxt,
                    interior=interior,
                    span=span,
                )
            )
        return steps

    def _build_mesh_topology(self):
        g = self.graph
        self.faces = bounded_faces(g)
        self.face_tris = []  # (face_index, (a, b, c) vertex ids)
        for fi, face in enumerate(self.faces):
            for tri in fan_triangulate(face):
                # Collinear boundary runs yield zero-area fan slivers; drop
                # them (planar area is exact on the grid and fold-invariant).
                (x1, y1), (x2, y2), (x3, y3) = (g.verts[v].pos for v in tri)
                if (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1) != 0:
                    self.face_tris.append((fi, tri))
        # Skip collision checks within a panel and across hinged neighbours.
        self.skip_pairs = set()
        m = len(self.face_tris)
        for i in range(m):
            fi, ti = self.face_tris[i]
            si = set(ti)
            for j in range(i + 1, m):
                fj, tj = self.face_tris[j]
                if fi == fj or len(si.intersection(tj)) >= 2:
                    self.skip_pairs.add((i, j))

    # -- folding -------------------------------------------------------------

    def fold(self, rho0: float) -> "FoldedState":
        g = self.graph
        rho = [None] * self.n_creases
        for cid in self.seed_cids:
            rho[cid] = rho0

        # Phase 1: dihedral angles, vertex by vertex in extension order.
        for vp in self.vplans:
            incoming_rho = []
            for i in vp.incoming_idx:
                r = rho[vp.fan_cids[i]]
                if r is None:
                    raise FoldInfeasibleError(vp.vid, "incoming crease unsolved")
                incoming_rho.append(r)
            mode = g.verts[vp.vid].mode or 1
            try:
                out_rho = solve_vertex(vp.sectors, vp.outgoing, incoming_rho, mode)
            except FoldInfeasibleError as err:
                raise FoldInfeasibleError(vp.vid, err.reason)
            it = iter(out_rho)
            for i, o in enumerate(vp.outgoing):
                if o:
                    rho[vp.fan_cids[i]] = next(it)

        # Phase 2: placement, propagating frames from the anchors.
        pos = {}
        frames = {}

        def place(vid, cand):
            q = pos.get(vid)
            if q is None:
                pos[vid] = cand
                return
            err = math.hypot(
                cand[0] - q[0], math.hypot(cand[1] - q[1], cand[2] - q[2])
            )
            if err > CONSIST_TOL:
                raise FoldInfeasibleError(vid, "panel placement mismatch")

        def set_frame(cid, h, at):
            known = frames.get(cid)
            if known is None:
                frames[cid] = h
            elif mat_diff(known, h) > CONSIST_TOL:
                raise FoldInfeasibleError(at, "crease frame mismatch")

        for cid, h, u, pu, v, pv in self.anchors:
            frames[cid] = h
            place(u, pu)
            place(v, pv)

        walked = set()
        ring_pos = [0] * len(self.ring_walks)

        def walk_vertex(vp):
            vid = vp.vid
            n = len(vp.fan_cids)
            ref_k = None
            for k in sorted(range(n), key=lambda k: vp.fan_cids[k]):
                if frames.get(vp.fan_cids[k]) is not None:
                    ref_k = k
                    break
            if ref_k is None or vid not in pos:
                return False
            base = pos[vid]
            ref_cid = vp.fan_cids[ref_k]
            ref = frames[ref_cid]
            k0 = ref if vp.fan_from_self[ref_k] else _flip_end(ref, rho[ref_cid])
            frame = k0
            for j in range(n):
                at = (ref_k + j) % n
                frame = mul_rz(frame, vp.sectors[at])
                idx = (at + 1) % n
                cid = vp.fan_cids[idx]
                frame = mul_rx(frame, rho[cid])
                if j == n - 1:
                    if mat_diff(frame, k0) > CONSIST_TOL:
                        raise FoldInfeasibleError(vid, "loop closure failed")
                    break
                h = frame if vp.fan_from_self[idx] else _flip_end(frame, rho[cid])
                set_frame(cid, h, vid)
                d = mat_col(frame, 0)
                ln = self.lengths[cid]
                place(
                    vp.fan_other[idx],
                    (base[0] + d[0] * ln, base[1] + d[1] * ln, base[2] + d[2] * ln),
                )
            walked.add(vid)
            return True

        vplan_by_vid = {vp.vid: vp for vp in self.vplans}
        progress = True
        while progress:
            progress = False
            for ri, steps in enumerate(self.ring_walks):
                while ring_pos[ri] < len(steps):
                    st = steps[ring_pos[ri]]
                    if g.verts[st.corner].extended:
                        # The corner's own fan walk supplies the next frame.
                        if frames.get(st.out_cid) is None:
                            break
                    else:
                        if frames.get(st.in_cid) is None or st.corner not in pos:
                            break
                        self._ring_transport(st, rho, pos, frames, place, set_frame)
                    ring_pos[ri] += 1
                    progress = True
            for vp in self.vplans:
                if vp.vid not in walked and walk_vertex(vp):
                    progress = True

        if len(walked) < len(self.vplans):
            missing = next(vp.vid for vp in self.vplans if vp.vid not in walked)
            raise FoldInfeasibleError(missing, "vertex unreachable from anchors")

        # Any leaf reachable only through unextended paper keeps its flat spot.
        for v in g.verts:
            if v.id not in pos:
                x, y = v.pos
                pos[v.id] = (float(x), float(y), 0.0)
        return FoldedState(self, rho0, pos, rho)

    def _ring_transport(self, st, rho, pos, frames, place, set_frame):
        """Carry the frame across an unextended ring corner's interior side."""
        g = self.graph
        c_in = g.creases[st.in_cid]
        f_in = frames[st.in_cid]
        k_in = f_in if c_in.u == st.corner else _flip_end(f_in, rho[st.in_cid])
        b = mul_rx(k_in, -rho[st.in_cid])
        m = IDENT
        prev_off = 0.0
        for cid, off in st.interior:
            r = rho[cid]
            if r is None:
                raise FoldInfeasibleError(st.corner, "interior crease unsolved")
            m = mul_rx(mul_rz(m, off - prev_off), r)
            prev_off = off
        m = mul_rz(m, st.span - prev_off)
        mt = tuple(zip(*m))  # transpose = inverse for rotations
        f_out = mat_mul(b, mt)
        d = mat_col(f_out, 0)
        ln = self.lengths[st.out_cid]
        base = pos[st.corner]
        place(
            st.next_corner,
            (base[0] + d[0] * ln, base[1] + d[1] * ln, base[2] + d[2] * ln),
        )
        c_out = g.creases[st.out_cid]
        h = f_out if c_out.u == st.corner else _flip_end(f_out, rho[st.out_cid])
        set_frame(st.out_cid, h, st.corner)


@dataclass
class FoldedState:
    """Result of folding one graph at one driving angle (immutable)."""

    plan: FoldPlan
    rho0: float
    positions: dict
    rho: list

    def position_array(self, ids=None):
        ids = range(len(self.plan.graph.verts)) if ids is None else ids
        return np.array([self.positions[i] for i in ids], dtype=float)

    def mesh(self):
        """Triangle array (T,3,3) over the placed panels, with skip pairs."""
        tris = []
        for _, (a, b, c) in self.plan.face_tris:
            tris.append(
                [self.positions[a], self.positions[b], self.positions[c]]
            )
        return np.array(tris, dtype=float).reshape(-1, 3, 3), self.plan.skip_pairs


# ---------------------------------------------------------------------------
# Public graph-level operations
# ---------------------------------------------------------------------------


def build_plan(graph: CreaseGraph) -> FoldPlan:
    cached = graph._plan_cache
    if cached is not None and cached.version == graph.version and cached.graph is graph:
        return cached
    plan = FoldPlan(graph)
    graph._plan_cache = plan
    return plan


def fold_graph(graph: CreaseGraph, rho0: float) -> FoldedState:
    return build_plan(graph).fold(rho0)


def motion_collision_free(graph: CreaseGraph, rho0: float, sweep_steps: int = 20) -> bool:
    """No panel pair intersects at any sampled angle of the folding motion."""
    plan = build_plan(graph)
    for k in range(1, sweep_steps + 1):
        folded = plan.fold(rho0 * k / sweep_steps)
        tris, skip = folded.mesh()
        if len(tris) >= 2 and geom.mesh_self_intersects(tris, skip):
            return False
    return True


def motion_first_failure(graph: CreaseGraph, rho_grid) -> int | None:
    """Index of the first grid angle whose fold fails or self-intersects."""
    plan = build_plan(graph)
    for k, r in enumerate(rho_grid):
        try:
            folded = plan.fold(r)
        except FoldInfeasibleError:
            return k
        tris, skip = folded.mesh()
        if len(tris) >= 2 and geom.mesh_self_intersects(tris, skip):
            return k
    return None


# ---------------------------------------------------------------------------
# Masking support: unit angles of a hypothetical extension
# ---------------------------------------------------------------------------


def incoming_fan_frames(graph: CreaseGraph, vid: int, rho_by_cid, exclude=()) -> list:
    """Folded frames of the known-angle fan at a vertex.

    Returns [(start_angle, frame)] per sector so that a planar direction theta
    maps to frame @ Rz(theta - start_angle) @ x-hat.  The base frame is
    arbitrary; only relative directions matter for unit-angle checks.  Creases
    in `exclude` (e.g. tentative outgoing ones) are skipped.
    """
    fan = [t for t in graph.incident_sorted(vid) if t[0].id not in exclude]
    if not fan:
        raise IsolatedVertexError(f"vertex {vid} has no incident creases")
    out = []
    frame = IDENT
    for k, (c, _, ang) in enumerate(fan):
        if k > 0:
            rho = rho_by_cid[c.id]
            frame = mul_rz(frame, ang - out[-1][0])
            frame = mul_rx(frame, rho)
        out.append((ang, frame))
    return out


def folded_direction(fan_frames, theta):
    """3D direction of a planar ray at angle theta through the folded fan."""
    n = len(fan_frames)
    base = fan_frames[0][0]
    rel = (theta - base) % TWO_PI
    k = 0
    for idx in range(n - 1, -1, -1):
        if (fan_frames[idx][0] - base) % TWO_PI <= rel + 1e-15:
            k = idx
            break
    start, frame = fan_frames[k]
    m = mul_rz(frame, (theta - start) % TWO_PI)
    return mat_col(m, 0)


def extension_unit_angles(graph, vid, new_angles, rho_by_cid, exclude=()):
    """Unit angles if vid were extended with outgoing creases at new_angles.

    new_angles are planar directions (radians) of the three tentative
    outgoing creases; incident creases not listed in `exclude` count as
    incoming with the dihedral angles supplied in rho_by_cid.
    """
    frames = incoming_fan_frames(graph, vid, rho_by_cid, exclude=exclude)
    dirs = sorted(
        ((a % TWO_PI, folded_direction(frames, a % TWO_PI)) for a in new_angles),
        key=lambda t: t[0],
    )
    us = []
    for k in range(3):
        d1 = dirs[k][1]
        d2 = dirs[(k + 1) % 3][1]
        us.append(math.atan2(_norm(_cross(d1, d2)), _dot(d1, d2)))
    return tuple(us)
