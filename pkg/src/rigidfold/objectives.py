"""Objectives: shape approximation with potential shaping plus the four
abstract design objectives (bucket, shelf, table, chair).

All folded coordinates handed to objectives are centred: the board centre is
the origin and the sheet starts in the z=0 plane.  Shape targets are built in
the same frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geom

# Abstract-objective constraint violations rank below every valid fold but are
# distinct from the non-foldable penalty.
DISCARD_VALUE = -1.0e6

# Fixed sampling defaults: target and surface clouds comparable across runs.
# At this density the coverage term's sampling floor sits near the best
# returns on the reference targets; smaller clouds drown the signal.
TARGET_SAMPLES = 16384
SURFACE_SAMPLES = 16384
TARGET_SEED = 7_291
SURFACE_SEED = 4_096


class _SampleCover:
    """Radius clusters over a fixed cloud for Lipschitz-bounded max-NN.

    max over the cloud of nearest-distance-to-X equals the max over clusters,
    and a cluster whose centre distance plus radius cannot beat the incumbent
    needs no member queries.
    """

    def __init__(self, points, radius=0.35):
        pts = np.asarray(points, float)
        cells = np.floor(pts / radius).astype(np.int64)
        buckets = {}
        for i, c in enumerate(map(tuple, cells)):
            buckets.setdefault(c, []).append(i)
        self.members = [np.array(v) for v in buckets.values()]
        self.centers = np.array([pts[m].mean(axis=0) for m in self.members])
        self.radii = np.array(
            [
                float(np.linalg.norm(pts[m] - c, axis=1).max())
                for m, c in zip(self.members, self.centers)
            ]
        )
        self.points = pts

    def max_nearest(self, tree, stop_above=None) -> float:
        """Exact max nearest-distance, or any value >= stop_above if the max
        provably reaches it (early abort for bound checks)."""
        d_c, _ = tree.query(self.centers, k=1)
        ub = d_c + self.radii
        order = np.argsort(-ub)
        best = 0.0
        for gi in order:
            if ub[gi] <= best:
                break
            if stop_above is not None and best >= stop_above:
                return best
            d, _ = tree.query(self.points[self.members[gi]], k=1)
            m = float(d.max())
            if m > best:
                best = m
        return best


@dataclass
class TargetShape:
    """Triangle mesh plus a fixed sample cloud of the surface."""

    mesh: np.ndarray  # (T, 3, 3)
    samples: geom.PointSet
    closed: bool
    name: str = "target"
    convex: bool = False

    @classmethod
    def from_mesh(
        cls,
        mesh,
        closed,
        name,
        sample_count=TARGET_SAMPLES,
        seed=TARGET_SEED,
        convex=False,
    ):
        mesh = np.asarray(mesh, dtype=float).reshape(-1, 3, 3)
        samples = geom.sample_surface(mesh, sample_count, seed)
        samples.provenance = "target-sample"
        return cls(mesh=mesh, samples=samples, closed=closed, name=name, convex=convex)

    def __post_init__(self):
        self._tree = cKDTree(self.samples.points)
        self._cover = _SampleCover(self.samples.points)
        if self.convex:
            a, b, c = self.mesh[:, 0], self.mesh[:, 1], self.mesh[:, 2]
            n = np.cross(b - a, c - a)
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            centroid = self.mesh.reshape(-1, 3).mean(axis=0)
            flip = np.einsum("tk,tk->t", n, a - centroid) < 0
            n[flip] *= -1.0  # outward normals
            self._planes = (n, -np.einsum("tk,tk->t", n, a))

    def coverage_distance(self, x_points, stop_above=None) -> float:
        """max over the target cloud of the distance to the nearest x point."""
        tree = cKDTree(np.asarray(x_points, float), balanced_tree=False)
        return self._cover.max_nearest(tree, stop_above=stop_above)

    def nearest_distances(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        d, _ = self._tree.query(pts, k=1)
        return np.atleast_1d(d)

    def contains(self, point) -> bool:
        """Strict interior test; always False for open targets."""
        return self.closed and geom.point_in_closed_mesh(point, self.mesh)

    def contains_batch(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if not self.closed:
            return np.zeros(len(pts), dtype=bool)
        if self.convex:
            n, d = self._planes
            signed = pts @ n.T + d
            return bool(0) | (signed < -1e-9).all(axis=1)
        return geom.points_in_closed_mesh(pts, self.mesh)


# ---------------------------------------------------------------------------
# Target constructions
# ---------------------------------------------------------------------------


def build_pyramid() -> TargetShape:
    """Square pyramid over the 4x4 base with apex at height sqrt(8)."""
    base = [(2, 2, 0), (-2, 2, 0), (-2, -2, 0), (2, -2, 0)]
    apex = (0.0, 0.0, math.sqrt(8.0))
    tris = [[base[k], base[(k + 1) % 4], apex] for k in range(4)]
    tris.append([base[0], base[1], base[2]])
    tris.append([base[0], base[2], base[3]])
    return TargetShape.from_mesh(np.array(tris, float), closed=True, name="pyramid", convex=True)


def build_cube() -> TargetShape:
    """Closed cube of edge 2, base centred on the origin at z = 0."""
    v = np.array(
        [
            [-1, -1, 0],
            [1, -1, 0],
            [1, 1, 0],
            [-1, 1, 0],
            [-1, -1, 2],
            [1, -1, 2],
            [1, 1, 2],
            [-1, 1, 2],
        ],
        dtype=float,
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
    return TargetShape.from_mesh(np.array(tris), closed=True, name="cube", convex=True)


def build_bowl(n_theta: int = 64, n_rad: int = 16) -> TargetShape:
    """Paraboloid annulus z = 0.2 r^2 - 0.6 for r in (1.6, 5) plus the flat
    bottom disk of radius 1.6 at the rim height."""
    tris = []
    thetas = np.linspace(0, 2 * math.pi, n_theta + 1)
    radii = np.linspace(1.6, 5.0, n_rad + 1)

    def ring_pt(r, t):
        return (r * math.cos(t), r * math.sin(t), 0.2 * r * r - 0.6)

    for a in range(n_theta):
        t0, t1 = thetas[a], thetas[a + 1]
        for b in range(n_rad):
            r0, r1 = radii[b], radii[b + 1]
            p00, p01 = ring_pt(r0, t0), ring_pt(r0, t1)
            p10, p11 = ring_pt(r1, t0), ring_pt(r1, t1)
            tris.append([p00, p10, p11])
            tris.append([p00, p11, p01])
        # Bottom disk wedge at the inner rim height.
        z = 0.2 * 1.6 * 1.6 - 0.6
        c = (0.0, 0.0, z)
        tris.append([c, ring_pt(1.6, t0), ring_pt(1.6, t1)])
    return TargetShape.from_mesh(np.array(tris, float), closed=False, name="bowl")


def load_target_mesh(path, closed: bool = False, name=None) -> TargetShape:
    """Wavefront OBJ loader; non-triangle faces are fan-split."""
    verts = []
    tris = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    tris.append([verts[idx[0]], verts[idx[k]], verts[idx[k + 1]]])
    if not tris:
        raise ValueError(f"no triangles parsed from {path}")
    return TargetShape.from_mesh(
        np.array(tris, float), closed=closed, name=name or str(path)
    )


# ---------------------------------------------------------------------------
# Shape approximation
# ---------------------------------------------------------------------------


def _exclude_enclosed(target: TargetShape, points: np.ndarray) -> np.ndarray:
    """Drop points strictly inside a closed target (they earn no reward).

    Falls back to the full set if everything is enclosed.
    """
    if not target.closed or len(points) == 0:
        return points
    keep = ~target.contains_batch(points)
    if not keep.any():
        return points
    return points[keep]


def shape_potential(target: TargetShape, positions) -> float:
    """Phi = -(furthest vertex distance to the target surface).

    The vertex-side term measures true distance to the target mesh, so a
    pattern whose vertices all sit on the target scores exactly zero.
    """
    pts = np.asarray(positions, float).reshape(-1, 3)
    if target.closed:
        pts = pts[~target.contains_batch(pts)]
        if len(pts) == 0:
            return 0.0
    return -float(np.max(geom.points_mesh_distance(pts, target.mesh)))


def shape_terminal(
    target: TargetShape,
    positions,
    mesh_tris,
    sample_count: int = SURFACE_SAMPLES,
    seed: int = SURFACE_SEED,
) -> float:
    """f = -max(vertex distance to target, target coverage distance).

    Coverage is measured between the fixed target cloud and a fresh sample
    cloud of the folded surface, as the objective prescribes.
    """
    d_to = -shape_potential(target, positions)
    if mesh_tris is not None and len(mesh_tris) > 0:
        x = geom.sample_surface(mesh_tris, sample_count, seed).points
    else:
        x = np.asarray(positions, float).reshape(-1, 3)
    x = _exclude_enclosed(target, x)
    d_from = target.coverage_distance(x)
    return -max(d_to, d_from)


# ---------------------------------------------------------------------------
# Objective protocol used by the environment
# ---------------------------------------------------------------------------


class Objective:
    """Scorer with a monotone potential and a terminal value."""

    name = "objective"
    supports_shaping = False  # guarantees r_t <= 0 when True

    def potential(self, graph, folded, positions) -> float:
        return 0.0

    def terminal(self, graph, folded, positions) -> float:
        raise NotImplementedError


class ShapeObjective(Objective):
    supports_shaping = True

    def __init__(self, target: TargetShape, sample_count=SURFACE_SAMPLES, seed=SURFACE_SEED):
        self.target = target
        self.sample_count = sample_count
        self.seed = seed
        self.name = f"shape:{target.name}"

    def potential(self, graph, folded, positions):
        return shape_potential(self.target, positions)

    def terminal(self, graph, folded, positions):
        tris, _ = folded.mesh()
        offset = positions[0] - np.array(folded.positions[0])
        tris = tris + offset if len(tris) else tris
        return shape_terminal(
            self.target, positions, tris, self.sample_count, self.seed
        )


def _leaf_ids(graph):
    return [v.id for v in graph.verts if not v.extended]


class BucketObjective(Objective):
    """Maximise the lowest rim point, requiring a reasonably compact cup."""

    name = "bucket"

    def terminal(self, graph, folded, positions):
        leaves = _leaf_ids(graph)
        pts = positions[leaves]
        zs = pts[:, 2]
        z_min, z_max = float(zs.min()), float(zs.max())
        norms = np.hypot(pts[:, 0], pts[:, 1])
        if z_max > 2.0 * z_min and not math.isclose(z_max, 2.0 * z_min, abs_tol=1e-12):
            return DISCARD_VALUE
        if float(norms.max()) > 2.0 * float(norms.min()) + 1e-12:
            return DISCARD_VALUE
        return z_min


class ShelfObjective(Objective):
    """Maximise the guaranteed area per level over >= 3 parallel levels."""

    name = "shelf"
    parallel_cos = 0.99
    level_gap = 0.25

    def terminal(self, graph, folded, positions):
        tris, _ = folded.mesh()
        if len(tris) < 3:
            return DISCARD_VALUE
        offset = positions[0] - np.array(folded.positions[0])
        tris = tris + offset
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        cross = np.cross(b - a, c - a)
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        ok = areas > 1e-12
        normals = cross[ok] / (2 * areas[ok])[:, None]
        areas = areas[ok]
        centers = tris[ok].mean(axis=1)

        groups = []  # (unit normal, [triangle indices])
        for i, n in enumerate(normals):
            for rep, members in groups:
                if abs(float(np.dot(rep, n))) >= self.parallel_cos:
                    members.append(i)
                    break
            else:
                groups.append((n, [i]))

        best = DISCARD_VALUE
        for rep, members in groups:
            offsets = np.array([float(np.dot(rep, centers[i])) for i in members])
            order = np.argsort(offsets)
            levels = []
            current = [members[order[0]]]
            for prev, nxt in zip(order, order[1:]):
                if offsets[nxt] - offsets[prev] >= self.level_gap:
                    levels.append(current)
                    current = []
                current.append(members[nxt])
            levels.append(current)
            if len(levels) < 3:
                continue
            min_area = min(float(areas[lv].sum()) for lv in map(np.array, levels))
            best = max(best, min_area)
        return best


class TableObjective(Objective):
    """Four legs to z = 2.5, everything else pinned to the plane."""

    name = "table"
    leg_height = 2.5

    def terminal(self, graph, folded, positions):
        zs = positions[:, 2]
        n = len(zs)
        order = np.argsort(-zs, kind="stable")
        top = order[:4]
        rest = order[4:]
        f = -float(np.mean(np.abs(zs[top] - self.leg_height)))
        if len(rest):
            f -= float(np.mean(np.abs(zs[rest])))
        return f


class ChairObjective(Objective):
    """Three legs down to z = -4 plus a backrest rising to z = 4 at |y| = 2.1."""

    name = "chair"
    seat_bound = 4.0
    leg_z = -4.0
    rest_z = 4.0
    rest_y = 2.1
    leg_spread_tol = 0.3

    def terminal(self, graph, folded, positions):
        xs, ys, zs = positions[:, 0], positions[:, 1], positions[:, 2]
        if float(np.abs(xs).max()) > self.seat_bound or float(np.abs(ys).max()) > self.seat_bound:
            return DISCARD_VALUE
        order = np.argsort(zs, kind="stable")
        legs = order[:3]
        if float(zs[legs].max() - zs[legs].min()) > self.leg_spread_tol:
            return DISCARD_VALUE
        leg_ys = ys[legs]
        if np.all(leg_ys > 0) or np.all(leg_ys < 0):
            return DISCARD_VALUE
        l_legs = float(
            np.mean(np.abs(zs[legs] - self.leg_z) + np.abs(np.abs(leg_ys) - self.rest_y))
        )
        above = zs > 0
        l_rest = abs(float(zs.max()) - self.rest_z)
        if above.any():
            l_rest += float(np.mean(np.abs(np.abs(ys[above]) - self.rest_y)))
        return -l_legs - l_rest


ABSTRACT_OBJECTIVES = {
    "bucket": BucketObjective,
    "shelf": ShelfObjective,
    "table": TableObjective,
    "chair": ChairObjective,
}
