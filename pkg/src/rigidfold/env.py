"""The origami game: turn phases, legal-action masking, step/reset semantics,
driving-angle bookkeeping, rollback on collision and reward emission.

One agent action edits the whole symmetry orbit atomically.  The environment
is deterministic: identical config and action sequence reproduce identical
states, rewards and observations bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import geom, kinematics as kin, pattern
from .objectives import Objective, ShapeObjective
from .pattern import Board, CreaseGraph, apply_sym, orbit, playable_area


class IllegalActionError(ValueError):
    pass


class InvalidConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


class Select(NamedTuple):
    cell: tuple  # cell of the extendable vertex (playable-area representative)
    mode: int


class Place(NamedTuple):
    cell: tuple


class Source(NamedTuple):
    cell: tuple


class SeedSize(NamedTuple):
    half: int


class Terminate(NamedTuple):
    pass


def action_to_dict(a):
    if isinstance(a, Select):
        return {"kind": "select", "cell": list(a.cell), "mode": a.mode}
    if isinstance(a, Place):
        return {"kind": "place", "cell": list(a.cell)}
    if isinstance(a, Source):
        return {"kind": "source", "cell": list(a.cell)}
    if isinstance(a, SeedSize):
        return {"kind": "seed_size", "half": a.half}
    return {"kind": "terminate"}


def action_from_dict(d):
    kind = d["kind"]
    if kind == "select":
        return Select(tuple(d["cell"]), int(d["mode"]))
    if kind == "place":
        return Place(tuple(d["cell"]))
    if kind == "source":
        return Source(tuple(d["cell"]))
    if kind == "seed_size":
        return SeedSize(int(d["half"]))
    if kind == "terminate":
        return Terminate()
    raise ValueError(f"unknown action kind {kind!r}")


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass
class EnvConfig:
    board_width: int
    board_height: int
    objective: Objective
    symmetry_axes: tuple = ()
    # ("square", half, center) | ("agent_square",) | ("crease", p1, p2) |
    # ("graph", CreaseGraph)
    seed: tuple = ("agent_square",)
    rho_max: float = math.pi
    n_angles: int = 10
    cl_max: Optional[float] = None
    allow_sources: bool = False
    fixed_rho: bool = False  # keep only the largest surviving angle from reset
    penalty: Optional[float] = None
    step_cap: int = 512
    sweep_steps: int = 20

    def board(self) -> Board:
        return Board(
            self.board_width,
            self.board_height,
            frozenset(self.symmetry_axes),
            self.cl_max,
        )

    @property
    def r_min(self) -> float:
        if self.penalty is not None:
            return self.penalty
        return -math.hypot(self.board_width - 1, self.board_height - 1)


def penalty(config: EnvConfig) -> float:
    """The non-foldable penalty r_min (negative)."""
    return config.r_min


# ---------------------------------------------------------------------------
# Driving-angle set
# ---------------------------------------------------------------------------


@dataclass
class AngleSet:
    values: tuple  # tracked driving angles, ascending
    alive: list  # per-angle liveness
    phi: list  # per-angle potential (frozen at death)
    counted: list  # vertices already folded into the potential, per angle
    worst: list  # furthest vertex-to-target distance so far, per angle

    @classmethod
    def fresh(cls, rho_max, n):
        vals = tuple(rho_max * k / n for k in range(1, n + 1))
        return cls(
            values=vals,
            alive=[True] * n,
            phi=[0.0] * n,
            counted=[0] * n,
            worst=[0.0] * n,
        )

    def copy(self):
        return AngleSet(
            self.values,
            list(self.alive),
            list(self.phi),
            list(self.counted),
            list(self.worst),
        )

    def alive_indices(self):
        return [k for k, a in enumerate(self.alive) if a]


# ---------------------------------------------------------------------------
# Game state
# ---------------------------------------------------------------------------


@dataclass
class GameState:
    config: EnvConfig
    board: Board
    graph: Optional[CreaseGraph]
    phase: str  # 'seed_choice' | 'select' | 'place'
    selected: Optional[int]
    slots_filled: int
    angles: Optional[AngleSet]
    snapshot: Optional[CreaseGraph]
    reward_sum: float
    steps: int
    status: str  # 'running' | 'done'
    done_reason: Optional[str]
    fold_cache: dict  # grid index j (1..2n) -> FoldedState of current graph
    trace: list
    terminal_angle: Optional[float] = None  # rho0* paid out at termination
    _mask: Optional[list] = None

    @property
    def place_k(self):
        return self.slots_filled + 1

    def clone(self) -> "GameState":
        return GameState(
            config=self.config,
            board=self.board,
            graph=self.graph.copy() if self.graph is not None else None,
            phase=self.phase,
            selected=self.selected,
            slots_filled=self.slots_filled,
            angles=self.angles.copy() if self.angles is not None else None,
            snapshot=self.snapshot,  # stable graphs are never mutated
            reward_sum=self.reward_sum,
            steps=self.steps,
            status=self.status,
            done_reason=self.done_reason,
            fold_cache=self.fold_cache,  # immutable FoldedStates, dict reassigned
            trace=list(self.trace),
            terminal_angle=self.terminal_angle,
            _mask=self._mask,
        )

    @property
    def done(self):
        return self.status == "done"


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class OrigamiEnv:
    """Deterministic single-player origami design game."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.board = config.board()
        self.playable = sorted(playable_area(self.board))
        self.group = self.board.group
        c = self.board.center
        self.center = (c[0], c[1], 0.0)
        self.grid_n = 2 * config.n_angles  # validation grid rho_max * j / grid_n

    # -- helpers ---------------------------------------------------------

    def grid_angle(self, j):
        return self.config.rho_max * j / self.grid_n

    def tracked_grid_index(self, k):
        """Grid index of tracked angle k (0-based k -> 2(k+1))."""
        return 2 * (k + 1)

    def centered_positions(self, folded, n_verts):
        p = folded.position_array(range(n_verts))
        return p - np.array(self.center)

    # -- reset -------------------------------------------------------------

    def reset(self) -> GameState:
        if not hasattr(self, "_proto_state"):
            self._proto_state = self._build_initial_state()
        return self._proto_state.clone()

    def _build_initial_state(self) -> GameState:
        cfg = self.config
        seed = cfg.seed
        state = GameState(
            config=cfg,
            board=self.board,
            graph=None,
            phase="seed_choice",
            selected=None,
            slots_filled=0,
            angles=None,
            snapshot=None,
            reward_sum=0.0,
            steps=0,
            status="running",
            done_reason=None,
            fold_cache={},
            trace=[],
        )
        if seed[0] == "agent_square":
            if not self._seed_size_options():
                raise InvalidConfigError("board too small for any seed square")
            state._mask = None
            return state
        if seed[0] == "square":
            half, center = seed[1], (seed[2] if len(seed) > 2 else None)
            graph = pattern.seed_square(self.board, half, center)
        elif seed[0] == "crease":
            graph = pattern.seed_single_crease(self.board, seed[1], seed[2])
        elif seed[0] == "graph":
            graph = pattern.seed_from_graph(self.board, seed[1])
        else:
            raise InvalidConfigError(f"unknown seed spec {seed!r}")
        self._install_seed(state, graph)
        return state

    def _seed_size_options(self):
        cx, cy = self.board.center
        if cx != int(cx) or cy != int(cy):
            return []
        lim = min(int(cx), int(cy), self.board.width - 1 - int(cx), self.board.height - 1 - int(cy))
        return list(range(1, lim + 1))

    def _install_seed(self, state, graph):
        cfg = self.config
        state.graph = graph
        state.angles = AngleSet.fresh(cfg.rho_max, cfg.n_angles)
        first_fail = self._validate(graph, self.grid_n)
        if first_fail is not None:
            for k in range(cfg.n_angles):
                if self.tracked_grid_index(k) >= first_fail:
                    state.angles.alive[k] = False
        if not state.angles.alive_indices():
            raise InvalidConfigError("seed pattern is not foldable at any angle")
        if cfg.fixed_rho:
            keep = max(state.angles.alive_indices())
            for k in range(cfg.n_angles):
                state.angles.alive[k] = k == keep
        self._refresh_fold_cache(state)
        self._update_potentials(state, emit=False)
        state.snapshot = graph.copy()
        state.phase = "select"
        state._mask = None

    # -- folding / validation ---------------------------------------------

    def _validate(self, graph, up_to_j, keep=None):
        """First failing grid index (fold failure or collision), or None.

        When keep is a dict, folded states at those grid indices are stored
        into it for reuse as the fold cache.
        """
        plan = kin.build_plan(graph)
        for j in range(1, up_to_j + 1):
            try:
                folded = plan.fold(self.grid_angle(j))
            except kin.FoldInfeasibleError:
                return j
            tris, skip = folded.mesh()
            if len(tris) >= 2 and geom.mesh_self_intersects(tris, skip):
                return j
            if keep is not None and j % 2 == 0:
                keep[j] = folded
        return None

    def _refresh_fold_cache(self, state):
        plan = kin.build_plan(state.graph)
        cache = {}
        alive = state.angles.alive_indices()
        for k in alive:
            j = self.tracked_grid_index(k)
            cache[j] = plan.fold(self.grid_angle(j))
        state.fold_cache = cache

    def _update_potentials(self, state, emit=True) -> float:
        """Fold new vertices into the per-angle potentials; return the reward."""
        obj = self.config.objective
        ang = state.angles
        if not isinstance(obj, ShapeObjective):
            return 0.0
        target = obj.target
        n_verts = len(state.graph.verts)
        deltas = []
        for k in ang.alive_indices():
            folded = state.fold_cache[self.tracked_grid_index(k)]
            start = ang.counted[k]
            if start < n_verts:
                pts = np.array(
                    [folded.positions[i] for i in range(start, n_verts)], dtype=float
                ) - np.array(self.center)
                if target.closed:
                    pts = pts[~target.contains_batch(pts)]
                if len(pts):
                    d = float(np.max(geom.points_mesh_distance(pts, target.mesh)))
                    ang.worst[k] = max(ang.worst[k], d)
                ang.counted[k] = n_verts
            new_phi = -ang.worst[k]
            deltas.append(new_phi - ang.phi[k])
            ang.phi[k] = new_phi
        if not emit or not deltas:
            return 0.0
        return max(deltas)

    def _terminal_value(self, state) -> float:
        """f(s_T, rho*) over the best surviving angle."""
        obj = self.config.objective
        ang = state.angles
        alive = ang.alive_indices()
        n_verts = len(state.graph.verts)
        if isinstance(obj, ShapeObjective):
            # worst[k] is the exact furthest-vertex distance at angle k, so
            # -worst bounds f from above; evaluate promising angles first and
            # let the coverage scan abort once an angle provably cannot win.
            target = obj.target
            offset = np.array(self.center)
            best = -math.inf
            best_k = alive[0]
            for k in sorted(alive, key=lambda k: ang.worst[k]):
                if -ang.worst[k] <= best:
                    break
                folded = state.fold_cache[self.tracked_grid_index(k)]
                tris, _ = folded.mesh()
                if len(tris):
                    x = geom.sample_surface(
                        tris - offset, obj.sample_count, obj.seed
                    ).points
                else:
                    x = self.centered_positions(folded, n_verts)
                if target.closed:
                    keep = ~target.contains_batch(x)
                    if keep.any():
                        x = x[keep]
                stop = -best if best > -math.inf else None
                d_from = target.coverage_distance(x, stop_above=stop)
                f = -max(ang.worst[k], d_from)
                if f > best:
                    best, best_k = f, k
            return best, ang.values[best_k]
        best = -math.inf
        best_k = alive[0]
        for k in alive:
            folded = state.fold_cache[self.tracked_grid_index(k)]
            pos = self.centered_positions(folded, n_verts)
            f = obj.terminal(state.graph, folded, pos)
            if f > best:
                best, best_k = f, k
        return best, ang.values[best_k]

    # -- legal actions -------------------------------------------------------

    def legal_actions(self, state) -> list:
        if state.status != "running":
            return []
        if state._mask is None:
            state._mask = self._compute_mask(state)
        return state._mask

    def _compute_mask(self, state) -> list:
        if state.phase == "seed_choice":
            return [SeedSize(h) for h in self._seed_size_options()]
        if state.phase == "select":
            acts = []
            g = state.graph
            for v in g.verts:
                if not v.extended and v.pos in self._playable_set:
                    acts.append(Select(v.pos, -1))
                    acts.append(Select(v.pos, 1))
            if self.config.allow_sources:
                acts.extend(self._source_actions(state))
            acts.append(Terminate())
            return acts
        return [Place(c) for c in self._place_candidates(state)]

    @property
    def _playable_set(self):
        if not hasattr(self, "_playable_cache"):
            self._playable_cache = set(self.playable)
        return self._playable_cache

    def _segments(self, graph):
        return [
            (graph.verts[c.u].pos, graph.verts[c.v].pos) for c in graph.creases
        ]

    def _source_actions(self, state):
        g = state.graph
        segs = self._segments(g)
        cells = {v.pos for v in g.verts}
        forbidden = self._ring_interior_cells(g)
        out = []
        for c in self.playable:
            orb = orbit(self.board, c)
            if len(orb) < 2:
                continue
            if any(x in cells or x in forbidden for x in orb):
                continue
            ring = self._ring_segments(orb)
            if not self._segments_legal(
                ring, segs, g, extra_cells=set(orb), new_cells=orb
            ):
                continue
            if len(orb) >= 3:
                # The ring interior is anchored paper: nothing may sit inside.
                cx = sum(p[0] for p in orb) / len(orb)
                cy = sum(p[1] for p in orb) / len(orb)
                poly = sorted(orb, key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
                if any(self._point_in_poly(v.pos, poly) for v in g.verts):
                    continue
            out.append(Source(c))
        return out

    def _ring_segments(self, cells):
        if len(cells) == 2:
            return [(cells[0], cells[1])]
        cx = sum(p[0] for p in cells) / len(cells)
        cy = sum(p[1] for p in cells) / len(cells)
        ordered = sorted(cells, key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
        return [
            (ordered[k], ordered[(k + 1) % len(ordered)]) for k in range(len(ordered))
        ]

    def _segments_legal(self, new_segs, existing_segs, graph, extra_cells=(), new_cells=()):
        """Planarity of a batch of new creases against the graph and each other.

        new_cells are cells gaining a vertex; they must not sit on the open
        interior of any existing crease.
        """
        for cell in new_cells:
            for p, q in existing_segs:
                if cell != p and cell != q and geom.point_on_open_segment_2d(cell, p, q):
                    return False
        for a, b in new_segs:
            if a == b:
                return False
            for p, q in existing_segs:
                if geom.seg_seg_intersect_2d(a, b, p, q):
                    return False
            for v in graph.verts:
                if v.pos != a and v.pos != b and geom.point_on_open_segment_2d(v.pos, a, b):
                    return False
            for cell in extra_cells:
                if cell != a and cell != b and geom.point_on_open_segment_2d(cell, a, b):
                    return False
        for i in range(len(new_segs)):
            for j in range(i + 1, len(new_segs)):
                a, b = new_segs[i]
                p, q = new_segs[j]
                if geom.seg_seg_intersect_2d(a, b, p, q):
                    return False
        return True

    def _ring_interior_cells(self, graph):
        """Cells strictly inside any anchored seed ring (kept crease-free)."""
        if not hasattr(self, "_ring_cells_cache"):
            self._ring_cells_cache = {}
        key = tuple(r.vertex_ids for r in graph.rings)
        cached = self._ring_cells_cache.get(key)
        if cached is not None:
            return cached
        cells = set()
        for ring in graph.rings:
            pts = [graph.verts[v].pos for v in ring.vertex_ids]
            if len(pts) < 3:
                continue
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            for i in range(min(xs) + 1, max(xs)):
                for j in range(min(ys) + 1, max(ys)):
                    if self._point_in_poly((i, j), pts):
                        cells.add((i, j))
        self._ring_cells_cache[key] = cells
        return cells

    @staticmethod
    def _point_in_poly(p, poly):
        inside = False
        n = len(poly)
        for k in range(n):
            a, b = poly[k], poly[(k + 1) % n]
            if (a[1] > p[1]) != (b[1] > p[1]):
                cross = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
                if p[0] < cross:
                    inside = not inside
        return inside

    def _stab_orbit(self, sel_cell, cell):
        """Endpoint cells attached to the representative under its stabiliser."""
        stab = [
            g
            for g in self.group
            if apply_sym(g, sel_cell, self.board.width, self.board.height) == sel_cell
        ]
        seen = []
        for g in stab:
            img = apply_sym(g, cell, self.board.width, self.board.height)
            if img not in seen:
                seen.append(img)
        return seen

    def _orbit_creases(self, state, sel_vid, cell):
        """Distinct new creases (u_cell, v_cell) over the whole orbit."""
        g = state.graph
        sel_cell = g.verts[sel_vid].pos
        pairs = []
        seen = set()
        for code in self.group:
            u = apply_sym(code, sel_cell, self.board.width, self.board.height)
            v = apply_sym(code, cell, self.board.width, self.board.height)
            key = (u, v)
            rkey = (v, u)
            if key in seen or rkey in seen:
                continue
            seen.add(key)
            pairs.append((u, v))
        return pairs

    def _place_candidates(self, state):
        g = state.graph
        sel = state.selected
        sel_cell = g.verts[sel].pos
        sel_orbit_cells = set(orbit(self.board, sel_cell))
        remaining = 3 - state.slots_filled
        cl_max = self.config.cl_max

        # Vertices with a directed path to the selected orbit: cycle guards.
        reaches = self._reaches_orbit(g, sel_orbit_cells)

        # Existing outgoing directions of the representative (committed slots).
        committed_angles = []
        for c in g.outgoing_ext(sel):
            ox, oy = g.verts[c.v].pos
            committed_angles.append(
                math.atan2(oy - sel_cell[1], ox - sel_cell[0]) % (2 * math.pi)
            )
        committed_cids = {c.id for c in g.outgoing_ext(sel)}

        # Cheap per-cell filters first; geometric predicates run batched.
        cands = []
        cand_pairs = []
        for cell in self.playable:
            if cell in sel_orbit_cells:
                continue
            occupant = g.cell2vid.get(cell)
            if occupant is not None and g.verts[occupant].extended:
                continue
            if cl_max is not None and math.dist(sel_cell, cell) > cl_max + 1e-12:
                continue
            stab_cells = self._stab_orbit(sel_cell, cell)
            if len(stab_cells) > remaining:
                continue
            if occupant is None and any(
                sc in g.cell2vid and g.verts[g.cell2vid[sc]].extended
                for sc in stab_cells
            ):
                continue
            new_pairs = self._orbit_creases(state, sel, cell)
            if any(
                (w := g.cell2vid.get(v)) is not None and w in reaches
                for _, v in new_pairs
            ):
                continue
            cands.append((cell, stab_cells))
            cand_pairs.append(new_pairs)
        if not cands:
            return []

        keep = self._batch_planarity(g, cands, cand_pairs)

        # Third slot: spherical triangle inequality at every alive angle.
        final_slot_data = []
        for k in state.angles.alive_indices():
            folded = state.fold_cache[self.tracked_grid_index(k)]
            rho_map = {i: r for i, r in enumerate(folded.rho) if r is not None}
            final_slot_data.append(rho_map)

        out = []
        for ci, (cell, stab_cells) in enumerate(cands):
            if not keep[ci]:
                continue
            if len(stab_cells) == remaining:
                new_angles = committed_angles + [
                    math.atan2(sc[1] - sel_cell[1], sc[0] - sel_cell[0]) % (2 * math.pi)
                    for sc in stab_cells
                ]
                if len(new_angles) == 3:
                    ok = True
                    for rho_map in final_slot_data:
                        us = kin.extension_unit_angles(
                            g, sel, new_angles, rho_map, exclude=committed_cids
                        )
                        if not kin.spherical_triangle_ok(us):
                            ok = False
                            break
                    if not ok:
                        continue
            out.append(cell)
        return out

    def _batch_planarity(self, g, cands, cand_pairs):
        """Vectorised planarity screen for per-candidate orbit creases."""
        seg_arr = np.array(
            [
                (*g.verts[c.u].pos, *g.verts[c.v].pos)
                for c in g.creases
            ],
            dtype=np.int64,
        ).reshape(-1, 4)
        vert_arr = np.array([v.pos for v in g.verts], dtype=np.int64).reshape(-1, 2)

        flat_segs = []
        owner = []
        fresh_cells = []
        fresh_owner = []
        for ci, pairs in enumerate(cand_pairs):
            for u, v in pairs:
                flat_segs.append((*u, *v))
                owner.append(ci)
                if v not in g.cell2vid:
                    fresh_cells.append(v)
                    fresh_owner.append(ci)
        flat = np.array(flat_segs, dtype=np.int64)
        owner = np.array(owner)
        n_c = len(cands)
        bad = np.zeros(n_c, dtype=bool)

        if len(seg_arr):
            cross = geom.batch_seg_seg_intersect(flat, seg_arr).any(axis=1)
            np.logical_or.at(bad, owner, cross)
        if len(vert_arr):
            onseg = geom.batch_point_on_open_segment(vert_arr, flat)
            # A vertex strictly inside a new crease, unless it is an endpoint.
            ends1 = (vert_arr[:, None, :] == flat[None, :, 0:2]).all(axis=2)
            ends2 = (vert_arr[:, None, :] == flat[None, :, 2:4]).all(axis=2)
            hit = (onseg & ~ends1 & ~ends2).any(axis=0)
            np.logical_or.at(bad, owner, hit)
        if fresh_cells and len(seg_arr):
            fc = np.array(fresh_cells, dtype=np.int64)
            on_old = geom.batch_point_on_open_segment(fc, seg_arr).any(axis=1)
            np.logical_or.at(bad, np.array(fresh_owner), on_old)
        # Orbit creases of one candidate against each other.
        for ci, pairs in enumerate(cand_pairs):
            if bad[ci] or len(pairs) < 2:
                continue
            for i in range(len(pairs)):
                for j in range(i + 1, len(pairs)):
                    a, b = pairs[i]
                    p, q = pairs[j]
                    if geom.seg_seg_intersect_2d(a, b, p, q):
                        bad[ci] = True
                        break
                if bad[ci]:
                    break
        return ~bad

    def _reaches_orbit(self, g, orbit_cells):
        """Vertices with a directed crease path into the selected orbit."""
        targets = {g.cell2vid[c] for c in orbit_cells if c in g.cell2vid}
        radj = [[] for _ in g.verts]
        for c in g.creases:
            radj[c.v].append(c.u)
        seen = set(targets)
        stack = list(targets)
        while stack:
            u = stack.pop()
            for w in radj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    # -- step -----------------------------------------------------------------

    def step(self, state: GameState, action):
        if state.status != "running":
            raise IllegalActionError("episode is over")
        mask = self.legal_actions(state)
        if action not in mask:
            raise IllegalActionError(f"action {action!r} not legal here")
        state.steps += 1
        reward = 0.0

        if isinstance(action, SeedSize):
            cx, cy = self.board.center
            graph = pattern.seed_square(self.board, action.half, (int(cx), int(cy)))
            self._install_seed(state, graph)
        elif isinstance(action, Terminate):
            reward = self._finish(state, "terminate")
        elif isinstance(action, Select):
            vid = state.graph.cell2vid[action.cell]
            for cell in orbit(self.board, action.cell):
                state.graph.set_mode(state.graph.cell2vid[cell], action.mode)
            state.selected = vid
            state.slots_filled = 0
            state.phase = "place"
        elif isinstance(action, Source):
            reward = self._apply_source(state, action.cell)
        elif isinstance(action, Place):
            reward = self._apply_place(state, action.cell)
        else:
            raise IllegalActionError(f"unhandled action {action!r}")

        state._mask = None
        if state.status == "running":
            if state.steps >= self.config.step_cap:
                reward += self._finish(state, "step-cap")
            elif not self.legal_actions(state):
                reward += self._finish(state, "exhausted")
        state.reward_sum += reward
        state.trace.append(
            {
                "t": state.steps,
                "action": action_to_dict(action),
                "reward": reward,
                "alive": len(state.angles.alive_indices()) if state.angles else 0,
            }
        )
        return state, reward, state.done

    def _finish(self, state, reason) -> float:
        """Normal termination: discard any half-built extension, pay out f."""
        if state.phase == "place":
            state.graph = state.snapshot.copy()
            state.phase = "select"
            state.selected = None
            state.slots_filled = 0
            self._refresh_fold_cache(state)
        state.status = "done"
        state.done_reason = reason
        f, state.terminal_angle = self._terminal_value(state)
        return f - state.reward_sum

    def _fail_extension(self, state) -> float:
        """All driving angles died: roll back and end with the penalty."""
        state.graph = state.snapshot.copy()
        state.phase = "select"
        state.selected = None
        state.slots_filled = 0
        self._refresh_fold_cache(state)
        state.status = "done"
        state.done_reason = "non-foldable"
        return self.config.r_min

    def _apply_source(self, state, cell) -> float:
        g = state.graph
        cells = orbit(self.board, cell)
        pattern.add_source_ring(g, cells)
        folds = {}
        first_fail = self._validate(g, self._top_grid(state), keep=folds)
        reward = self._kill_angles_and_score(state, first_fail, folds)
        if state.status == "running":
            state.snapshot = g.copy()
        return reward

    def _apply_place(self, state, cell) -> float:
        g = state.graph
        sel = state.selected
        pairs = self._orbit_creases(state, sel, cell)
        added_from = {}
        for u_cell, v_cell in pairs:
            u = g.cell2vid[u_cell]
            w = g.cell2vid.get(v_cell)
            if w is None:
                w = g.add_vertex(v_cell)
            g.add_crease(u, w)
            added_from[u] = added_from.get(u, 0) + 1
        sel_added = added_from.get(sel, 0)
        state.slots_filled += sel_added
        if state.slots_filled < 3:
            return 0.0
        # Extension complete over the whole orbit.
        for c in orbit(self.board, g.verts[sel].pos):
            g.set_extended(g.cell2vid[c])
        state.phase = "select"
        state.selected = None
        state.slots_filled = 0
        folds = {}
        first_fail = self._validate(g, self._top_grid(state), keep=folds)
        reward = self._kill_angles_and_score(state, first_fail, folds)
        if state.status == "running":
            state.snapshot = g.copy()
        return reward

    def _top_grid(self, state):
        return self.tracked_grid_index(max(state.angles.alive_indices()))

    def _kill_angles_and_score(self, state, first_fail, folds=None) -> float:
        ang = state.angles
        if first_fail is not None:
            for k in ang.alive_indices():
                if self.tracked_grid_index(k) >= first_fail:
                    ang.alive[k] = False
        if not ang.alive_indices():
            return self._fail_extension(state)
        if folds is not None:
            state.fold_cache = {
                self.tracked_grid_index(k): folds[self.tracked_grid_index(k)]
                for k in ang.alive_indices()
            }
        else:
            self._refresh_fold_cache(state)
        return self._update_potentials(state)

    # -- observation ---------------------------------------------------------

    def encode_observation(self, state) -> np.ndarray:
        w, h = self.board.width, self.board.height
        obs = np.zeros((w, h, w * h + 2), dtype=np.int8)
        if state.graph is None:
            return obs
        g = state.graph
        for v in g.verts:
            if v.mode is not None:
                obs[v.pos[0], v.pos[1], 0] = v.mode
        for c in g.creases:
            u, v = g.verts[c.u], g.verts[c.v]
            if c.v + 1 <= w * h:
                obs[u.pos[0], u.pos[1], 1 + c.v] = 1
            if c.u + 1 <= w * h:
                obs[v.pos[0], v.pos[1], 1 + c.u] = -1
        if state.selected is not None:
            i, j = g.verts[state.selected].pos
            obs[i, j, w * h + 1] = 1
        return obs


# ---------------------------------------------------------------------------
# Record / replay harness
# ---------------------------------------------------------------------------


def replay(config: EnvConfig, actions) -> GameState:
    """Re-run a recorded action sequence; returns the final state."""
    env = OrigamiEnv(config)
    state = env.reset()
    for a in actions:
        if isinstance(a, dict):
            a = action_from_dict(a)
        state, _, done = env.step(state, a)
        if done:
            break
    return state
