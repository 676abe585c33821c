"""Grid board and crease-pattern graph.

The board is a w x h cell grid; vertices sit on integer cells.  Symmetry is a
reflection group acting on cells; agent actions are always expressed on the
playable area (a fundamental domain) and mirrored to the whole board.

The crease graph is directed: extension creases point from the extended vertex
to its children.  Seed creases (the starting square / line and any later
source rings) are stored with a flag; they receive the driving angle directly
and do not count towards the out-degree rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import geom


class InvariantViolation(ValueError):
    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"{name}: {detail}" if detail else name)


class OutOfBoundsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Symmetry machinery
# ---------------------------------------------------------------------------

# A group element is (swap, flip_i, flip_j): cell (i, j) -> swap first, then
# mirror i across the centre column and/or j across the centre row.
IDENTITY = (0, 0, 0)


def apply_sym(code, cell, w, h):
    s, a, b = code
    i, j = cell
    if s:
        i, j = j, i
    if a:
        i = w - 1 - i
    if b:
        j = h - 1 - j
    return (i, j)


def elem_sign(code):
    """Orientation sign of the reflection (+1 rotation, -1 mirror)."""
    s, a, b = code
    return -1 if (s + a + b) % 2 else 1


_GENERATORS = {"y": (0, 1, 0), "x": (0, 0, 1), "xy": (1, 0, 0)}


def group_elements(axes, w, h):
    """Closure of the reflection group generated by the enabled axes."""
    gens = [_GENERATORS[a] for a in axes]
    if any(g[0] for g in gens) and w != h:
        raise ValueError("xy symmetry requires a square board")
    # Compose on a probe basis to stay in (swap, flip_i, flip_j) codes.
    def compose(f, g):  # f after g
        probe = {}
        for cell in [(0, 0), (1, 0), (0, 1)]:
            probe[cell] = apply_sym(f, apply_sym(g, cell, w, h), w, h)
        for code in _ALL_CODES:
            if all(apply_sym(code, c, w, h) == p for c, p in probe.items()):
                return code
        raise AssertionError("composition left the dihedral group")

    elems = {IDENTITY}
    frontier = [IDENTITY]
    while frontier:
        e = frontier.pop()
        for g in gens:
            c = compose(g, e)
            if c not in elems:
                elems.add(c)
                frontier.append(c)
    return sorted(elems)


_ALL_CODES = [(s, a, b) for s in (0, 1) for a in (0, 1) for b in (0, 1)]


@dataclass(frozen=True)
class Board:
    width: int
    height: int
    symmetry_axes: frozenset = frozenset()
    cl_max: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "symmetry_axes", frozenset(self.symmetry_axes))

    @property
    def group(self):
        return group_elements(self.symmetry_axes, self.width, self.height)

    def in_bounds(self, cell):
        i, j = cell
        return 0 <= i < self.width and 0 <= j < self.height

    @property
    def center(self):
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)


def orbit(board: Board, cell) -> list:
    """Deterministic orbit of a cell (identity image first, then sorted)."""
    seen = []
    for code in [IDENTITY] + [c for c in board.group if c != IDENTITY]:
        img = apply_sym(code, cell, board.width, board.height)
        if img not in seen:
            seen.append(img)
    return seen


def reflect_action(board: Board, cell) -> set:
    return set(orbit(board, cell))


def playable_area(board: Board) -> set:
    """Fundamental domain of the symmetry group, axes included."""
    group = set(board.group)
    w, h = board.width, board.height
    cells = set()
    for i in range(w):
        for j in range(h):
            if (0, 1, 0) in group and i > (w - 1) // 2:
                continue
            if (0, 0, 1) in group and j > (h - 1) // 2:
                continue
            if (1, 0, 0) in group and i > j:
                continue
            cells.add((i, j))
    return cells


# ---------------------------------------------------------------------------
# Crease graph
# ---------------------------------------------------------------------------


class VertexRec(NamedTuple):
    id: int
    pos: tuple
    mode: Optional[int]  # rigid body mode, set when the vertex is selected
    kind: str  # 'source' | 'interior'
    extended: bool


class CreaseRec(NamedTuple):
    id: int
    u: int  # from-vertex
    v: int  # to-vertex
    is_seed: bool  # seed/source-ring creases carry the driving angle


class RingRec(NamedTuple):
    vertex_ids: tuple  # corners in CCW order; interior is the bounded side
    crease_ids: tuple


def crease_length(graph, crease) -> float:
    (i1, j1), (i2, j2) = graph.verts[crease.u].pos, graph.verts[crease.v].pos
    return math.hypot(i2 - i1, j2 - j1)


class CreaseGraph:
    """Vertices on grid cells plus directed creases; insertion-order ids."""

    __slots__ = (
        "verts",
        "creases",
        "cell2vid",
        "inc",
        "rings",
        "anchor",
        "version",
        "ext_order",
        "_plan_cache",
    )

    def __init__(self):
        self.verts: list[VertexRec] = []
        self.creases: list[CreaseRec] = []
        self.cell2vid: dict = {}
        self.inc: list[list[int]] = []  # incident crease ids per vertex
        self.rings: list[RingRec] = []
        # Root paper fixed in space: ('ring', ring_idx) or ('crease', crease_id)
        self.anchor = None
        self.version = 0
        self.ext_order: list[int] = []  # extension order = kinematic solve order
        self._plan_cache = None

    # -- construction -----------------------------------------------------

    def add_vertex(self, pos, kind="interior", mode=None) -> int:
        pos = (int(pos[0]), int(pos[1]))
        if pos in self.cell2vid:
            raise InvariantViolation("duplicate-cell", f"cell {pos} already occupied")
        vid = len(self.verts)
        self.verts.append(VertexRec(vid, pos, mode, kind, False))
        self.inc.append([])
        self.cell2vid[pos] = vid
        self.version += 1
        return vid

    def add_crease(self, u, v, is_seed=False) -> int:
        if u == v:
            raise InvariantViolation("self-loop")
        cid = len(self.creases)
        self.creases.append(CreaseRec(cid, u, v, is_seed))
        self.inc[u].append(cid)
        self.inc[v].append(cid)
        self.version += 1
        return cid

    def set_mode(self, vid, mode):
        self.verts[vid] = self.verts[vid]._replace(mode=mode)
        self.version += 1

    def set_extended(self, vid):
        self.verts[vid] = self.verts[vid]._replace(extended=True)
        self.ext_order.append(vid)
        self.version += 1

    def copy(self) -> "CreaseGraph":
        g = CreaseGraph.__new__(CreaseGraph)
        g.verts = list(self.verts)
        g.creases = list(self.creases)
        g.cell2vid = dict(self.cell2vid)
        g.inc = [list(x) for x in self.inc]
        g.rings = list(self.rings)
        g.anchor = self.anchor
        g.version = self.version
        g.ext_order = list(self.ext_order)
        g._plan_cache = self._plan_cache
        return g

    # -- queries ----------------------------------------------------------

    def outgoing_ext(self, vid) -> list:
        """Extension creases emanating from vid (the out-degree that counts)."""
        return [
            c
            for cid in self.inc[vid]
            if (c := self.creases[cid]).u == vid and not c.is_seed
        ]

    def incident_sorted(self, vid) -> list:
        """Incident creases ordered CCW by planar direction away from vid.

        Returns [(crease, other_vid, angle)], angle in [0, 2pi).
        """
        px, py = self.verts[vid].pos
        out = []
        for cid in self.inc[vid]:
            c = self.creases[cid]
            other = c.v if c.u == vid else c.u
            ox, oy = self.verts[other].pos
            ang = math.atan2(oy - py, ox - px) % (2 * math.pi)
            out.append((c, other, ang))
        out.sort(key=lambda t: t[2])
        return out

    def sources(self) -> list:
        return [v.id for v in self.verts if v.kind == "source"]

    def undirected_cell_creases(self) -> set:
        out = set()
        for c in self.creases:
            a, b = self.verts[c.u].pos, self.verts[c.v].pos
            out.add((min(a, b), max(a, b)))
        return out


# ---------------------------------------------------------------------------
# Structural invariants
# ---------------------------------------------------------------------------


def is_acyclic(graph: CreaseGraph) -> bool:
    indeg = [0] * len(graph.verts)
    adj = [[] for _ in graph.verts]
    for c in graph.creases:
        adj[c.u].append(c.v)
        indeg[c.v] += 1
    queue = [i for i, d in enumerate(indeg) if d == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return seen == len(graph.verts)


def check_invariants(graph: CreaseGraph, board: Board):
    """Raise InvariantViolation naming the first violated constraint."""
    cells = set()
    for v in graph.verts:
        if not board.in_bounds(v.pos):
            raise InvariantViolation("out-of-bounds", str(v.pos))
        if v.pos in cells:
            raise InvariantViolation("duplicate-cell", str(v.pos))
        cells.add(v.pos)

    if not is_acyclic(graph):
        raise InvariantViolation("acyclicity", "directed cycle present")

    segs = [
        (graph.verts[c.u].pos, graph.verts[c.v].pos) for c in graph.creases
    ]
    for a in range(len(segs)):
        for b in range(a + 1, len(segs)):
            if geom.seg_seg_intersect_2d(*segs[a], *segs[b]):
                raise InvariantViolation("planarity", f"creases {a} and {b} cross")
    for v in graph.verts:
        for (p, q) in segs:
            if v.pos != p and v.pos != q and geom.point_on_open_segment_2d(v.pos, p, q):
                raise InvariantViolation(
                    "planarity", f"vertex {v.id} lies on a crease interior"
                )

    for v in graph.verts:
        deg = len(graph.outgoing_ext(v.id))
        if v.extended and deg != 3:
            raise InvariantViolation("out-degree", f"vertex {v.id} has {deg} != 3")
        if not v.extended and deg != 0:
            raise InvariantViolation("out-degree", f"unextended vertex {v.id} has {deg}")

    group = board.group
    if len(group) > 1:
        vcells = {v.pos for v in graph.verts}
        for code in group:
            if {apply_sym(code, c, board.width, board.height) for c in vcells} != vcells:
                raise InvariantViolation("symmetry", "vertex set not closed")
        ucreases = graph.undirected_cell_creases()
        for code in group:
            img = {
                tuple(
                    sorted(
                        (
                            apply_sym(code, a, board.width, board.height),
                            apply_sym(code, b, board.width, board.height),
                        )
                    )
                )
                for a, b in ucreases
            }
            if img != ucreases:
                raise InvariantViolation("symmetry", "crease set not closed")


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------


def _ring_creases(graph, ids):
    """Close a ring acyclically: a path around plus one reversed final edge."""
    cids = []
    for k in range(len(ids) - 1):
        cids.append(graph.add_crease(ids[k], ids[k + 1], is_seed=True))
    cids.append(graph.add_crease(ids[0], ids[-1], is_seed=True))
    return cids


def seed_square(board: Board, half_size: int, center=None) -> CreaseGraph:
    """Four source corners of an axis-aligned square joined by seed creases."""
    if center is None:
        cx, cy = board.center
        if cx != int(cx) or cy != int(cy):
            raise OutOfBoundsError("board centre is not on a cell; pass center=")
        center = (int(cx), int(cy))
    cx, cy = center
    h = int(half_size)
    if h < 1:
        raise OutOfBoundsError("half_size must be >= 1")
    corners = [
        (cx - h, cy - h),
        (cx + h, cy - h),
        (cx + h, cy + h),
        (cx - h, cy + h),
    ]  # CCW
    for c in corners:
        if not board.in_bounds(c):
            raise OutOfBoundsError(f"square corner {c} off the board")
    g = CreaseGraph()
    ids = [g.add_vertex(c, kind="source") for c in corners]
    cids = _ring_creases(g, ids)
    g.rings.append(RingRec(tuple(ids), tuple(cids)))
    g.anchor = ("ring", 0)
    return g


def seed_single_crease(board: Board, p1, p2) -> CreaseGraph:
    if tuple(p1) == tuple(p2):
        raise OutOfBoundsError("seed crease endpoints coincide")
    for c in (p1, p2):
        if not board.in_bounds(c):
            raise OutOfBoundsError(f"seed endpoint {c} off the board")
    g = CreaseGraph()
    a = g.add_vertex(p1, kind="source")
    b = g.add_vertex(p2, kind="source")
    g.add_crease(a, b, is_seed=True)
    g.anchor = ("crease", 0)
    return g


def seed_from_graph(board: Board, graph: CreaseGraph) -> CreaseGraph:
    check_invariants(graph, board)
    if graph.anchor is None:
        raise InvariantViolation("anchor", "seed graph lacks a root anchor")
    return graph.copy()


def add_source_ring(graph: CreaseGraph, cells: list) -> RingRec:
    """Create new source vertices for a symmetry orbit, joined as a ring.

    Two cells make a single seed crease; three or more are ordered CCW around
    their centroid.  The ring interior is anchored flat like the seed's.
    """
    if len(cells) < 2:
        raise InvariantViolation("source-ring", "needs at least two cells")
    cx = sum(c[0] for c in cells) / len(cells)
    cy = sum(c[1] for c in cells) / len(cells)
    ordered = sorted(cells, key=lambda c: math.atan2(c[1] - cy, c[0] - cx))
    ids = [graph.add_vertex(c, kind="source") for c in ordered]
    if len(ids) == 2:
        cids = (graph.add_crease(ids[0], ids[1], is_seed=True),)
    else:
        cids = tuple(_ring_creases(graph, ids))
    ring = RingRec(tuple(ids), cids)
    graph.rings.append(ring)
    return ring


# ---------------------------------------------------------------------------
# Planar faces (panels)
# ---------------------------------------------------------------------------


def _strip_spurs(cycle):
    """Remove zero-width u,v,u excursions from a face walk."""
    out = list(cycle)
    changed = True
    while changed and len(out) >= 3:
        changed = False
        n = len(out)
        for i in range(n):
            if out[i] == out[(i + 2) % n]:
                j = (i + 1) % n
                k = (i + 2) % n
                for idx in sorted({j, k}, reverse=True):
                    out.pop(idx)
                changed = True
                break
    return out


def bounded_faces(graph: CreaseGraph) -> list:
    """Panels: bounded faces of the planar embedding, as CCW vertex-id cycles.

    Dangling creases show up as spurs in the walk and are stripped; a face is
    kept when at least three distinct vertices and positive area remain.
    """
    rot = {}  # vid -> list of half-edges (cid, other) in CCW order
    index = {}
    for v in graph.verts:
        entries = graph.incident_sorted(v.id)
        rot[v.id] = [(c.id, other) for c, other, _ in entries]
        for k, (cid, other) in enumerate(rot[v.id]):
            index[(v.id, cid)] = k

    visited = set()
    faces = []
    for v in graph.verts:
        for cid, other in rot[v.id]:
            he = (v.id, cid, other)
            if he in visited:
                continue
            cycle = []
            cur = he
            while cur not in visited:
                visited.add(cur)
                u, c, w = cur
                cycle.append(u)
                # Arrive at w; leave via the CW-next half-edge after the twin.
                k = index[(w, c)]
                nxt_cid, nxt_other = rot[w][(k - 1) % len(rot[w])]
                cur = (w, nxt_cid, nxt_other)
            area = 0.0
            pts = [graph.verts[u].pos for u in cycle]
            for k in range(len(pts)):
                x1, y1 = pts[k]
                x2, y2 = pts[(k + 1) % len(pts)]
                area += x1 * y2 - x2 * y1
            if area <= 1e-9:
                continue
            poly = _strip_spurs(cycle)
            if len(set(poly)) >= 3:
                faces.append(poly)
    return faces


def fan_triangulate(face_ids: list) -> list:
    """Fan triangulation of a panel from its lowest-id vertex."""
    pivot_pos = min(range(len(face_ids)), key=lambda k: face_ids[k])
    ids = face_ids[pivot_pos:] + face_ids[:pivot_pos]
    return [(ids[0], ids[k], ids[k + 1]) for k in range(1, len(ids) - 1)]
