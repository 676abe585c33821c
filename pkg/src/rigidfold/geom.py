"""Geometry kernel: triangle intersection, 2D segment tests, surface sampling,
Hausdorff distances and point-in-mesh queries.

All 3D math is double precision.  2D segment predicates are exact whenever the
inputs are integers (board cells), since Python integer arithmetic is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]

# Triangles with area at or below this are rejected by the collision tests.
AREA_EPS = 1e-9
# Contact features within this distance of a shared vertex/edge do not count
# as an intersection (adjacent panels always touch along their crease).
SHARED_FEATURE_TOL = 1e-7
# Coplanarity / interval slack for the triangle-triangle test.
_PLANE_EPS = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateTriangleError(GeometryError):
    pass


class ZeroLengthSegmentError(GeometryError):
    pass


class EmptyInputError(GeometryError):
    pass


@dataclass
class PointSet:
    """A bag of 3D points with a provenance tag."""

    points: np.ndarray
    provenance: str = "unspecified"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# Basic helpers
# ---------------------------------------------------------------------------


def triangle_area(tri) -> float:
    a, b, c = (np.asarray(p, dtype=float) for p in tri)
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


def _check_triangle(tri, name):
    if triangle_area(tri) <= AREA_EPS:
        raise DegenerateTriangleError(f"{name} has area <= {AREA_EPS}")


# ---------------------------------------------------------------------------
# 2D segment intersection (exact on integer input)
# ---------------------------------------------------------------------------


def _cross2(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def seg_seg_intersect_2d(p1, p2, q1, q2) -> bool:
    """True iff the open segments (p1,p2) and (q1,q2) cross or overlap.

    Touching only at endpoints (shared vertices of the crease graph) is not an
    intersection; neither is an endpoint resting on the other segment's
    interior.  Exact when coordinates are integers.
    """
    if tuple(p1) == tuple(p2) or tuple(q1) == tuple(q2):
        raise ZeroLengthSegmentError("segments must have positive length")
    d1 = _cross2(q1, q2, p1)
    d2 = _cross2(q1, q2, p2)
    d3 = _cross2(p1, p2, q1)
    d4 = _cross2(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
        # Collinear: open 1D interval overlap along the dominant direction.
        axis = 0 if abs(p2[0] - p1[0]) >= abs(p2[1] - p1[1]) else 1
        lo_p, hi_p = sorted((p1[axis], p2[axis]))
        lo_q, hi_q = sorted((q1[axis], q2[axis]))
        return max(lo_p, lo_q) < min(hi_p, hi_q)
    return False


def point_on_open_segment_2d(p, a, b) -> bool:
    """True iff p lies strictly inside segment (a, b).  Exact on integers."""
    if _cross2(a, b, p) != 0:
        return False
    ax = 0 if abs(b[0] - a[0]) >= abs(b[1] - a[1]) else 1
    lo, hi = sorted((a[ax], b[ax]))
    return lo < p[ax] < hi


def batch_seg_seg_intersect(new_segs, old_segs) -> np.ndarray:
    """(N, E) open-crossing/overlap matrix; exact on integer input.

    Segments are rows (x1, y1, x2, y2).  Matches seg_seg_intersect_2d.
    """
    a = np.asarray(new_segs, dtype=np.int64).reshape(-1, 4)
    b = np.asarray(old_segs, dtype=np.int64).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=bool)
    p1 = a[:, None, 0:2]
    p2 = a[:, None, 2:4]
    q1 = b[None, :, 0:2]
    q2 = b[None, :, 2:4]

    def cross(o, u, v):
        return (u[..., 0] - o[..., 0]) * (v[..., 1] - o[..., 1]) - (
            u[..., 1] - o[..., 1]
        ) * (v[..., 0] - o[..., 0])

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    proper = (
        ((d1 > 0) & (d2 < 0) | (d1 < 0) & (d2 > 0))
        & ((d3 > 0) & (d4 < 0) | (d3 < 0) & (d4 > 0))
    )
    collinear = (d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0)
    # Open 1D overlap along the new segment's dominant axis.
    use_x = np.abs(p2[..., 0] - p1[..., 0]) >= np.abs(p2[..., 1] - p1[..., 1])
    ax_p1 = np.where(use_x, p1[..., 0], p1[..., 1])
    ax_p2 = np.where(use_x, p2[..., 0], p2[..., 1])
    ax_q1 = np.where(use_x, q1[..., 0], q1[..., 1])
    ax_q2 = np.where(use_x, q2[..., 0], q2[..., 1])
    lo_p = np.minimum(ax_p1, ax_p2)
    hi_p = np.maximum(ax_p1, ax_p2)
    lo_q = np.minimum(ax_q1, ax_q2)
    hi_q = np.maximum(ax_q1, ax_q2)
    overlap = np.maximum(lo_p, lo_q) < np.minimum(hi_p, hi_q)
    return proper | (collinear & overlap)


def batch_point_on_open_segment(points, segs) -> np.ndarray:
    """(P, E) strict-interior incidence; exact on integer input."""
    p = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    s = np.asarray(segs, dtype=np.int64).reshape(-1, 4)
    if len(p) == 0 or len(s) == 0:
        return np.zeros((len(p), len(s)), dtype=bool)
    a = s[None, :, 0:2]
    b = s[None, :, 2:4]
    pp = p[:, None, :]
    cross = (b[..., 0] - a[..., 0]) * (pp[..., 1] - a[..., 1]) - (
        b[..., 1] - a[..., 1]
    ) * (pp[..., 0] - a[..., 0])
    use_x = np.abs(b[..., 0] - a[..., 0]) >= np.abs(b[..., 1] - a[..., 1])
    ax_p = np.where(use_x, pp[..., 0], pp[..., 1])
    ax_a = np.where(use_x, a[..., 0], a[..., 1])
    ax_b = np.where(use_x, b[..., 0], b[..., 1])
    lo = np.minimum(ax_a, ax_b)
    hi = np.maximum(ax_a, ax_b)
    return (cross == 0) & (lo < ax_p) & (ax_p < hi)


# ---------------------------------------------------------------------------
# Triangle-triangle intersection
# ---------------------------------------------------------------------------


def _plane_dists(tri, other):
    a, b, c = tri
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    n = n / norm
    d = -np.dot(n, a)
    return n, d, np.array([np.dot(n, p) + d for p in other])


def _project_axis(n):
    return int(np.argmax(np.abs(n)))


def _tri_2d(tri, drop):
    keep = [k for k in range(3) if k != drop]
    return [np.array([p[keep[0]], p[keep[1]]]) for p in tri]


def _seg_cross_2d_f(p1, p2, q1, q2) -> bool:
    # Proper open crossing, float tolerant version of seg_seg_intersect_2d.
    d1 = _cross2(q1, q2, p1)
    d2 = _cross2(q1, q2, p2)
    d3 = _cross2(p1, p2, q1)
    d4 = _cross2(p1, p2, q2)
    eps = _PLANE_EPS
    return ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    )


def _point_in_tri_2d(p, a, b, c, strict=True) -> bool:
    d1 = _cross2(a, b, p)
    d2 = _cross2(b, c, p)
    d3 = _cross2(c, a, p)
    eps = _PLANE_EPS if strict else -_PLANE_EPS
    pos = (d1 > eps) and (d2 > eps) and (d3 > eps)
    neg = (d1 < -eps) and (d2 < -eps) and (d3 < -eps)
    return pos or neg


def _coplanar_overlap_2d(t1, t2) -> bool:
    """Positive-measure overlap of two coplanar triangles (projected 2D)."""
    for i in range(3):
        for j in range(3):
            if _seg_cross_2d_f(t1[i], t1[(i + 1) % 3], t2[j], t2[(j + 1) % 3]):
                return True
    if any(_point_in_tri_2d(p, *t2) for p in t1):
        return True
    if any(_point_in_tri_2d(p, *t1) for p in t2):
        return True
    return False


def _interval_on_line(tri, dists, line_dir):
    """Parametric interval of tri's cross-section on the intersection line.

    Returns (tmin, tmax, pmin, pmax) where p are the actual 3D points.
    """
    proj = [np.dot(line_dir, v) for v in tri]
    pts = []
    for i in range(3):
        for j in range(i + 1, 3):
            di, dj = dists[i], dists[j]
            if (di > 0 and dj < 0) or (di < 0 and dj > 0):
                t = di / (di - dj)
                pts.append(proj[i] + t * (proj[j] - proj[i]))
            elif di == 0 and dj == 0:
                pts.append(proj[i])
                pts.append(proj[j])
        if dists[i] == 0:
            pts.append(proj[i])
    if not pts:
        return None
    return min(pts), max(pts)


def _moller_interval(t1, t2):
    """Intersection interval of two non-coplanar triangles.

    Returns None when disjoint, otherwise (lo, hi, point_lo, point_hi) on the
    common line.
    """
    n1, d1, dist2 = _plane_dists(t1, t2)
    if all(d > _PLANE_EPS for d in dist2) or all(d < -_PLANE_EPS for d in dist2):
        return None
    n2, d2, dist1 = _plane_dists(t2, t1)
    if all(d > _PLANE_EPS for d in dist1) or all(d < -_PLANE_EPS for d in dist1):
        return None
    line = np.cross(n1, n2)
    norm = np.linalg.norm(line)
    if norm < _PLANE_EPS:
        return "coplanar"
    line = line / norm
    i1 = _interval_on_line(t1, dist1, line)
    i2 = _interval_on_line(t2, dist2, line)
    if i1 is None or i2 is None:
        return None
    lo = max(i1[0], i2[0])
    hi = min(i1[1], i2[1])
    if hi <= lo:
        return None
    # Reconstruct endpoints: points on the line with parameters lo / hi.
    # Build a point on the intersection line of the two planes.
    a = np.array([n1, n2, line])
    b = np.array([-d1, -d2, 0.0])
    origin = np.linalg.solve(a, b)
    t0 = np.dot(line, origin)
    p_lo = origin + (lo - t0) * line
    p_hi = origin + (hi - t0) * line
    return lo, hi, p_lo, p_hi


def tri_tri_intersect(t1, t2, shared_vertex_tolerance: float = SHARED_FEATURE_TOL) -> bool:
    """Positive-measure intersection test with shared-feature exemption.

    Contact exclusively along a shared edge or at a shared vertex (pairs of
    vertices closer than the tolerance) reports False: adjacent panels hinge
    at creases.  Raises DegenerateTriangleError on near-zero-area input.
    """
    t1 = [np.asarray(p, dtype=float) for p in t1]
    t2 = [np.asarray(p, dtype=float) for p in t2]
    _check_triangle(t1, "t1")
    _check_triangle(t2, "t2")
    tol = shared_vertex_tolerance

    shared = [
        (i, j)
        for i in range(3)
        for j in range(3)
        if float(np.linalg.norm(t1[i] - t2[j])) <= tol
    ]

    if len(shared) >= 3:
        return True  # same triangle (up to tolerance)

    if len(shared) == 2:
        return _hinged_pair_overlap(t1, t2, shared)

    if len(shared) == 1:
        return _vertex_pinned_overlap(t1, t2, shared[0], tol)

    res = _moller_interval(t1, t2)
    if res is None:
        return False
    if res == "coplanar":
        n1 = np.cross(t1[1] - t1[0], t1[2] - t1[0])
        axis = _project_axis(n1)
        return _coplanar_overlap_2d(_tri_2d(t1, axis), _tri_2d(t2, axis))
    lo, hi, _, _ = res
    return (hi - lo) > tol


def _hinged_pair_overlap(t1, t2, shared):
    """Triangles sharing an edge: intersect only if folded flat onto each other."""
    (i0, j0), (i1, j1) = shared
    k1 = 3 - i0 - i1  # the vertex of t1 off the shared edge
    k2 = 3 - j0 - j1
    a, b = t1[i0], t1[i1]
    n = np.cross(t1[1] - t1[0], t1[2] - t1[0])
    n = n / np.linalg.norm(n)
    off = float(np.dot(n, t2[k2] - t1[0]))
    if abs(off) > SHARED_FEATURE_TOL:
        return False  # genuinely hinged: contact is the edge only
    # Coplanar: overlap iff the two apexes lie on the same side of the edge.
    edge = b - a
    s1 = np.cross(edge, t1[k1] - a)
    s2 = np.cross(edge, t2[k2] - a)
    return float(np.dot(s1, s2)) > 0


def _vertex_pinned_overlap(t1, t2, pair, tol):
    """Triangles sharing one vertex: intersect iff contact extends beyond it."""
    i0, j0 = pair
    pivot = t1[i0]
    res = _moller_interval(t1, t2)
    if res is None:
        return False
    if res == "coplanar":
        n1 = np.cross(t1[1] - t1[0], t1[2] - t1[0])
        axis = _project_axis(n1)
        u1, u2 = _tri_2d(t1, axis), _tri_2d(t2, axis)
        # Wedge overlap at the pivot: the corner angular intervals intersect.
        keep = [k for k in range(3) if k != axis]
        pv = np.array([pivot[keep[0]], pivot[keep[1]]])
        if _corner_wedges_overlap(u1, i0, u2, j0, pv):
            return True
        # Or the bodies overlap away from the pivot.
        for i in range(3):
            for j in range(3):
                if _seg_cross_2d_f(u1[i], u1[(i + 1) % 3], u2[j], u2[(j + 1) % 3]):
                    return True
        if any(_point_in_tri_2d(p, *u2) for k, p in enumerate(u1) if k != i0):
            return True
        if any(_point_in_tri_2d(p, *u1) for k, p in enumerate(u2) if k != j0):
            return True
        return False
    lo, hi, p_lo, p_hi = res
    far = max(float(np.linalg.norm(p_lo - pivot)), float(np.linalg.norm(p_hi - pivot)))
    return far > tol


def _corner_wedges_overlap(u1, i0, u2, j0, pivot):
    def corner_interval(u, i):
        p = u[i]
        q = u[(i + 1) % 3] - p
        r = u[(i + 2) % 3] - p
        a0 = np.arctan2(q[1], q[0])
        a1 = np.arctan2(r[1], r[0])
        span = (a1 - a0) % (2 * np.pi)
        if span > np.pi:  # corner angles are < pi; take the other orientation
            a0, a1 = a1, a0
            span = 2 * np.pi - span
        return a0, span

    a0, s0 = corner_interval(u1, i0)
    b0, s1 = corner_interval(u2, j0)
    delta = (b0 - a0) % (2 * np.pi)
    # Intervals [0, s0] and [delta, delta+s1] on the circle.
    eps = 1e-9
    for shift in (-2 * np.pi, 0.0, 2 * np.pi):
        lo = max(0.0, delta + shift)
        hi = min(s0, delta + shift + s1)
        if hi - lo > eps:
            return True
    return False


# ---------------------------------------------------------------------------
# Batch mesh self-intersection (used by the folding-motion sweep)
# ---------------------------------------------------------------------------


def mesh_self_intersects(triangles: np.ndarray, skip_pairs: set) -> bool:
    """True iff any pair of triangles not in skip_pairs intersects.

    triangles: (T, 3, 3) float array.  skip_pairs: set of (i, j) with i < j
    for pairs exempt from checking (same panel, hinged neighbours).  Runs a
    vectorised interval test over all candidate pairs; pairs with shared or
    borderline features fall back to the tolerant scalar test.
    """
    tris = np.asarray(triangles, dtype=float)
    n = len(tris)
    if n < 2:
        return False
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    pad = SHARED_FEATURE_TOL
    ii, jj = np.triu_indices(n, k=1)
    box = np.all(lo[jj] <= hi[ii] + pad, axis=1) & np.all(
        hi[jj] >= lo[ii] - pad, axis=1
    )
    ii, jj = ii[box], jj[box]
    if skip_pairs:
        keep = np.fromiter(
            ((int(a), int(b)) not in skip_pairs for a, b in zip(ii, jj)),
            dtype=bool,
            count=len(ii),
        )
        ii, jj = ii[keep], jj[keep]
    if len(ii) == 0:
        return False
    verdict, unsure = _batch_disjoint(tris[ii], tris[jj])
    if verdict.any():
        return True
    for a, b in zip(ii[unsure], jj[unsure]):
        if tri_tri_intersect(tris[a], tris[b]):
            return True
    return False


def _batch_interval(proj, dist):
    """Per-triangle parameter interval on the intersection line (vectorised).

    proj, dist: (P, 3).  Returns (lo, hi); empty cross-sections yield
    lo=+inf, hi=-inf.
    """
    big = np.inf
    lo = np.full(len(proj), big)
    hi = np.full(len(proj), -big)
    for i in range(3):
        for j in range(i + 1, 3):
            di, dj = dist[:, i], dist[:, j]
            crossing = (di > 0) != (dj > 0)
            denom = np.where(crossing, di - dj, 1.0)
            t = proj[:, i] + (proj[:, j] - proj[:, i]) * np.where(
                crossing, di / denom, 0.0
            )
            lo = np.where(crossing, np.minimum(lo, t), lo)
            hi = np.where(crossing, np.maximum(hi, t), hi)
        on_plane = dist[:, i] == 0
        lo = np.where(on_plane, np.minimum(lo, proj[:, i]), lo)
        hi = np.where(on_plane, np.maximum(hi, proj[:, i]), hi)
    return lo, hi


def _batch_disjoint(t1, t2):
    """Vectorised Moller test over paired triangles.

    Returns (intersecting, unsure): definite positive-measure intersections
    beyond the shared-feature tolerance, and pairs needing the scalar test
    (multiple shared vertices, coplanar contacts, borderline intervals).
    """
    p = len(t1)
    tol = SHARED_FEATURE_TOL
    # Shared-vertex detection (geometric, within tolerance).
    dmat = np.linalg.norm(t1[:, :, None, :] - t2[:, None, :, :], axis=3)
    share_mask = dmat <= tol
    n_shared = share_mask.sum(axis=(1, 2))

    n1 = np.cross(t1[:, 1] - t1[:, 0], t1[:, 2] - t1[:, 0])
    n2 = np.cross(t2[:, 1] - t2[:, 0], t2[:, 2] - t2[:, 0])
    d1 = -np.einsum("pk,pk->p", n1, t1[:, 0])
    d2 = -np.einsum("pk,pk->p", n2, t2[:, 0])
    s2 = np.einsum("pk,pvk->pv", n1, t2) + d1[:, None]
    s1 = np.einsum("pk,pvk->pv", n2, t1) + d2[:, None]
    scale1 = np.linalg.norm(n1, axis=1)[:, None]
    scale2 = np.linalg.norm(n2, axis=1)[:, None]
    eps = 1e-12
    sep = (s2 > eps * scale1).all(axis=1) | (s2 < -eps * scale1).all(axis=1)
    sep |= (s1 > eps * scale2).all(axis=1) | (s1 < -eps * scale2).all(axis=1)

    line = np.cross(n1, n2)
    line_len = np.linalg.norm(line, axis=1)
    coplanar = line_len <= 1e-10 * np.maximum(scale1[:, 0] * scale2[:, 0], 1e-30)

    inter = np.zeros(p, dtype=bool)
    borderline = np.zeros(p, dtype=bool)
    transversal = ~sep & ~coplanar & (n_shared <= 1)
    if transversal.any():
        ln = line / np.where(line_len > 0, line_len, 1.0)[:, None]
        pr1 = np.einsum("pk,pvk->pv", ln, t1)
        pr2 = np.einsum("pk,pvk->pv", ln, t2)
        lo1, hi1 = _batch_interval(pr1, s1)
        lo2, hi2 = _batch_interval(pr2, s2)
        lo = np.maximum(lo1, lo2)
        hi = np.minimum(hi1, hi2)
        overlap = hi - lo
        pinned = transversal & (n_shared == 1)
        plain = transversal & (n_shared == 0)
        inter |= plain & (overlap > tol)
        borderline |= plain & (overlap > -tol) & (overlap <= tol)
        if pinned.any():
            # The shared vertex lies on the intersection line; contact counts
            # only when the overlap interval extends beyond it.
            idx = np.nonzero(pinned)[0]
            vi = np.argmax(share_mask[idx].any(axis=2), axis=1)
            vpos = t1[idx, vi]
            tv = np.einsum("pk,pk->p", ln[idx], vpos)
            far = np.maximum(np.abs(lo[idx] - tv), np.abs(hi[idx] - tv))
            good = overlap[idx] > tol
            inter[idx[good & (far > 2 * tol)]] = True
            borderline[idx[good & (far <= 2 * tol)]] = True
    # Coplanar pairs sharing one vertex: convex corner cones overlap iff the
    # triangles do; resolved by the angular wedge test.
    cop1 = ~sep & coplanar & (n_shared == 1)
    if cop1.any():
        idx = np.nonzero(cop1)[0]
        vi = np.argmax(share_mask[idx].any(axis=2), axis=1)
        vj = np.argmax(share_mask[idx].any(axis=1), axis=1)
        res_inter, res_unsure = _batch_wedge_overlap(t1[idx], t2[idx], vi, vj, n1[idx])
        inter[idx[res_inter]] = True
        borderline[idx[res_unsure]] = True
    unsure = (~sep & ~inter) & (
        borderline | (coplanar & (n_shared == 0)) | (n_shared >= 2)
    )
    return inter, unsure


def _batch_wedge_overlap(t1, t2, vi, vj, normals):
    """Corner-cone overlap for coplanar triangle pairs pinned at one vertex."""
    p = len(t1)
    rows = np.arange(p)
    n = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    pivot = t1[rows, vi]

    def cone(tri, k):
        a = tri[rows, (k + 1) % 3] - pivot
        b = tri[rows, (k + 2) % 3] - pivot
        # Order (a, b) counterclockwise around n.
        flip = np.einsum("pk,pk->p", np.cross(a, b), n) < 0
        a2 = np.where(flip[:, None], b, a)
        b2 = np.where(flip[:, None], a, b)
        return a2, b2

    a1, b1 = cone(t1, vi)
    a2, b2 = cone(t2, vj)

    def strictly_inside(x, lo, hi):
        c1 = np.einsum("pk,pk->p", np.cross(lo, x), n)
        c2 = np.einsum("pk,pk->p", np.cross(x, hi), n)
        return c1, c2

    eps = 1e-9
    inter = np.zeros(p, dtype=bool)
    unsure = np.zeros(p, dtype=bool)
    for x, lo, hi in ((a2, a1, b1), (b2, a1, b1), (a1, a2, b2), (b1, a2, b2)):
        c1, c2 = strictly_inside(x, lo, hi)
        scale = np.abs(c1) + np.abs(c2) + 1e-30
        inter |= (c1 > eps * scale) & (c2 > eps * scale)
        unsure |= (np.abs(c1) <= eps * scale) | (np.abs(c2) <= eps * scale)
    return inter, unsure & ~inter


# ---------------------------------------------------------------------------
# Surface sampling
# ---------------------------------------------------------------------------


def sample_surface(mesh, count: int, seed: int) -> PointSet:
    """Area-weighted uniform samples over a triangle soup.  Deterministic."""
    tris = np.asarray(mesh, dtype=float)
    if tris.size == 0:
        raise EmptyInputError("cannot sample an empty mesh")
    tris = tris.reshape(-1, 3, 3)
    if count < 1:
        raise EmptyInputError("count must be >= 1")
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = float(areas.sum())
    if total <= 0:
        raise EmptyInputError("mesh has zero total area")
    rng = np.random.Generator(np.random.PCG64(seed))
    cum = np.cumsum(areas)
    idx = np.searchsorted(cum, rng.random(count) * total, side="right")
    idx = np.minimum(idx, len(tris) - 1)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    u = 1.0 - r1
    v = r1 * (1.0 - r2)
    w = r1 * r2
    pts = (
        u[:, None] * a[idx] + v[:, None] * b[idx] + w[:, None] * c[idx]
    )
    return PointSet(pts, provenance="surface-sample")


# ---------------------------------------------------------------------------
# Hausdorff distances
# ---------------------------------------------------------------------------


def _as_points(ps) -> np.ndarray:
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=float)
    pts = pts.reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInputError("point set is empty")
    return pts


def directed_hausdorff(x, y) -> float:
    """max over x of the distance to the nearest point of y."""
    xp, yp = _as_points(x), _as_points(y)
    if len(xp) * len(yp) <= 20000:
        d2 = ((xp[:, None, :] - yp[None, :, :]) ** 2).sum(axis=2)
        return float(np.sqrt(d2.min(axis=1).max()))
    tree = cKDTree(yp)
    dist, _ = tree.query(xp, k=1)
    return float(np.max(dist))


def hausdorff(x, y) -> float:
    return max(directed_hausdorff(x, y), directed_hausdorff(y, x))


@_njit(cache=True, fastmath=False)
def _pt_tri_dist_kernel(pts, tris):  # pragma: no cover - exercised via wrapper
    n = pts.shape[0]
    m = tris.shape[0]
    out = np.empty(n)
    for i in range(n):
        px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
        best = 1e300
        for t in range(m):
            ax, ay, az = tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2]
            bx, by, bz = tris[t, 1, 0], tris[t, 1, 1], tris[t, 1, 2]
            cx, cy, cz = tris[t, 2, 0], tris[t, 2, 1], tris[t, 2, 2]
            abx, aby, abz = bx - ax, by - ay, bz - az
            acx, acy, acz = cx - ax, cy - ay, cz - az
            apx, apy, apz = px - ax, py - ay, pz - az
            d1 = abx * apx + aby * apy + abz * apz
            d2 = acx * apx + acy * apy + acz * apz
            if d1 <= 0.0 and d2 <= 0.0:
                qx, qy, qz = ax, ay, az
            else:
                bpx, bpy, bpz = px - bx, py - by, pz - bz
                d3 = abx * bpx + aby * bpy + abz * bpz
                d4 = acx * bpx + acy * bpy + acz * bpz
                if d3 >= 0.0 and d4 <= d3:
                    qx, qy, qz = bx, by, bz
                else:
                    vc = d1 * d4 - d3 * d2
                    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                        w = d1 / (d1 - d3)
                        qx, qy, qz = ax + w * abx, ay + w * aby, az + w * abz
                    else:
                        cpx, cpy, cpz = px - cx, py - cy, pz - cz
                        d5 = abx * cpx + aby * cpy + abz * cpz
                        d6 = acx * cpx + acy * cpy + acz * cpz
                        if d6 >= 0.0 and d5 <= d6:
                            qx, qy, qz = cx, cy, cz
                        else:
                            vb = d5 * d2 - d1 * d6
                            if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                                w = d2 / (d2 - d6)
                                qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
                            else:
                                va = d3 * d6 - d5 * d4
                                if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                                    w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                                    qx = bx + w * (cx - bx)
                                    qy = by + w * (cy - by)
                                    qz = bz + w * (cz - bz)
                                else:
                                    den = va + vb + vc
                                    v = vb / den
                                    w = vc / den
                                    qx = ax + v * abx + w * acx
                                    qy = ay + v * aby + w * acy
                                    qz = az + v * abz + w * acz
            dx, dy, dz = px - qx, py - qy, pz - qz
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
        out[i] = np.sqrt(best)
    return out


@_njit(cache=True)
def _parity_kernel(pts, tris, dirs, eps):  # pragma: no cover - via wrapper
    n = pts.shape[0]
    m = tris.shape[0]
    out = np.zeros(n, dtype=np.int8)  # 0 outside, 1 inside, 2 undecided
    for i in range(n):
        decided = False
        for r in range(dirs.shape[0]):
            dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
            hits = 0
            ok = True
            for t in range(m):
                ax, ay, az = tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2]
                e1x, e1y, e1z = tris[t, 1, 0] - ax, tris[t, 1, 1] - ay, tris[t, 1, 2] - az
                e2x, e2y, e2z = tris[t, 2, 0] - ax, tris[t, 2, 1] - ay, tris[t, 2, 2] - az
                hx = dy * e2z - dz * e2y
                hy = dz * e2x - dx * e2z
                hz = dx * e2y - dy * e2x
                det = e1x * hx + e1y * hy + e1z * hz
                sx, sy, sz = pts[i, 0] - ax, pts[i, 1] - ay, pts[i, 2] - az
                if abs(det) < eps:
                    nx = e1y * e2z - e1z * e2y
                    ny = e1z * e2x - e1x * e2z
                    nz = e1x * e2y - e1y * e2x
                    nn = np.sqrt(nx * nx + ny * ny + nz * nz)
                    if nn > 0 and abs(sx * nx + sy * ny + sz * nz) < eps * nn:
                        ok = False
                        break
                    continue
                u = (sx * hx + sy * hy + sz * hz) / det
                qx = sy * e1z - sz * e1y
                qy = sz * e1x - sx * e1z
                qz = sx * e1y - sy * e1x
                v = (dx * qx + dy * qy + dz * qz) / det
                th = (e2x * qx + e2y * qy + e2z * qz) / det
                if th <= eps:
                    continue
                if u < -eps or v < -eps or u + v > 1.0 + eps:
                    continue
                if u < eps or v < eps or u + v > 1.0 - eps:
                    ok = False
                    break
                hits += 1
            if ok:
                out[i] = 1 if hits % 2 == 1 else 0
                decided = True
                break
        if not decided:
            out[i] = 2
    return out


def points_mesh_distance(points, tris) -> np.ndarray:
    """Exact distance from each point to the nearest triangle of a mesh."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
    trs = np.ascontiguousarray(np.asarray(tris, dtype=float).reshape(-1, 3, 3))
    if len(pts) == 0:
        return np.zeros(0)
    if _HAVE_NUMBA:
        return _pt_tri_dist_kernel(pts, trs)
    return _points_mesh_distance_np(pts, trs)


def _points_mesh_distance_np(points, tris) -> np.ndarray:
    """Numpy fallback: closest-point-on-triangle over all pairs."""
    p = np.asarray(points, dtype=float).reshape(-1, 1, 3)
    t = np.asarray(tris, dtype=float).reshape(1, -1, 3, 3)
    a, b, c = t[:, :, 0], t[:, :, 1], t[:, :, 2]
    ab, ac = b - a, c - a
    ap = p - a
    d1 = np.einsum("pti,pti->pt", np.broadcast_arrays(ab, ap)[0], ap)
    d2 = np.einsum("pti,pti->pt", np.broadcast_arrays(ac, ap)[0], ap)
    bp = p - b
    d3 = np.einsum("pti,pti->pt", np.broadcast_arrays(ab, bp)[0], bp)
    d4 = np.einsum("pti,pti->pt", np.broadcast_arrays(ac, bp)[0], bp)
    cp = p - c
    d5 = np.einsum("pti,pti->pt", np.broadcast_arrays(ab, cp)[0], cp)
    d6 = np.einsum("pti,pti->pt", np.broadcast_arrays(ac, cp)[0], cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom_v = vc.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 != d3, d1 / (d1 - d3), 0.0)
        w_ac = np.where(d2 != d6, d2 / (d2 - d6), 0.0)
        w_bc = np.where(
            ((d4 - d3) + (d5 - d6)) != 0, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0
        )
        den = va + vb + vc
        vv = np.where(den != 0, vb / den, 0.0)
        ww = np.where(den != 0, vc / den, 0.0)

    closest = a + vv[..., None] * ab + ww[..., None] * ac  # interior default
    # Edge BC region
    on_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    cand = b + w_bc[..., None] * (c - b)
    closest = np.where(on_bc[..., None], cand, closest)
    # Edge AC region
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    cand = a + w_ac[..., None] * ac
    closest = np.where(on_ac[..., None], cand, closest)
    # Edge AB region
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    cand = a + v_ab[..., None] * ab
    closest = np.where(on_ab[..., None], cand, closest)
    # Vertex regions
    at_c = (d6 >= 0) & (d5 <= d6)
    closest = np.where(at_c[..., None], np.broadcast_to(c, closest.shape), closest)
    at_b = (d3 >= 0) & (d4 <= d3)
    closest = np.where(at_b[..., None], np.broadcast_to(b, closest.shape), closest)
    at_a = (d1 <= 0) & (d2 <= 0)
    closest = np.where(at_a[..., None], np.broadcast_to(a, closest.shape), closest)

    d = np.linalg.norm(p - closest, axis=2)
    return d.min(axis=1)


# ---------------------------------------------------------------------------
# Point in closed mesh
# ---------------------------------------------------------------------------

# Fixed pseudo-random ray directions; deterministic retries on degenerate hits.
_RAY_DIRS = np.array(
    [
        [0.813724, 0.291929, 0.502123],
        [-0.404201, 0.862015, 0.306093],
        [0.134906, -0.563917, 0.814727],
        [0.707302, -0.650391, -0.277198],
        [-0.892134, -0.173205, 0.417288],
        [0.250901, 0.930117, -0.266703],
        [-0.331809, -0.424816, -0.842290],
        [0.594413, 0.104917, -0.797288],
    ]
)
_RAY_EPS = 1e-9


def _ray_tri(origin, direction, tri):
    """Moller-Trumbore.  Returns (kind, t): kind in {'miss','hit','degenerate'}."""
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    h = np.cross(direction, e2)
    det = np.dot(e1, h)
    if abs(det) < _RAY_EPS:
        # Ray parallel to the triangle plane; if close to the plane, retry.
        n = np.cross(e1, e2)
        n /= np.linalg.norm(n)
        if abs(np.dot(n, origin - tri[0])) < _RAY_EPS:
            return "degenerate", 0.0
        return "miss", 0.0
    s = origin - tri[0]
    u = np.dot(s, h) / det
    q = np.cross(s, e1)
    v = np.dot(direction, q) / det
    t = np.dot(e2, q) / det
    if t <= _RAY_EPS:
        return "miss", 0.0
    if u < -_RAY_EPS or v < -_RAY_EPS or u + v > 1 + _RAY_EPS:
        return "miss", 0.0
    if u < _RAY_EPS or v < _RAY_EPS or u + v > 1 - _RAY_EPS:
        return "degenerate", t  # hits an edge/vertex: retry with another ray
    return "hit", t


def point_in_closed_mesh(p, mesh) -> bool:
    """Strict interior test by ray parity, retrying on degenerate ray hits.

    The caller guarantees a watertight mesh; behaviour on open meshes is
    unspecified.
    """
    p = np.asarray(p, dtype=float)
    tris = np.asarray(mesh, dtype=float).reshape(-1, 3, 3)
    # On-surface points are not strictly inside.
    for tri in tris:
        if _point_triangle_dist(p, tri) < _RAY_EPS:
            return False
    for direction in _RAY_DIRS:
        hits = 0
        ok = True
        for tri in tris:
            kind, _ = _ray_tri(p, direction, tri)
            if kind == "degenerate":
                ok = False
                break
            if kind == "hit":
                hits += 1
        if ok:
            return hits % 2 == 1
    return hits % 2 == 1  # all rays degenerate: give the last parity


def points_in_closed_mesh(points, mesh) -> np.ndarray:
    """Vectorised strict-interior test for many points against one mesh.

    Same ray-parity semantics as point_in_closed_mesh; points whose ray grazes
    an edge retry with the next fixed direction.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 3))
    tris = np.ascontiguousarray(np.asarray(mesh, dtype=float).reshape(-1, 3, 3))
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=bool)
    on_surface = points_mesh_distance(pts, tris) < _RAY_EPS
    if _HAVE_NUMBA:
        par = _parity_kernel(pts, tris, _RAY_DIRS, _RAY_EPS)
    else:
        par = np.array(
            [2 for _ in range(n)], dtype=np.int8
        )  # defer everything to the scalar path
    result = par == 1
    for i in np.nonzero(par == 2)[0]:
        result[i] = point_in_closed_mesh(pts[i], tris)
    result[on_surface] = False
    return result


def _point_triangle_dist(p, tri) -> float:
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = np.dot(ab, ap), np.dot(ac, ap)
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(ap))
    bp = p - b
    d3, d4 = np.dot(ab, bp), np.dot(ac, bp)
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(bp))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + v * ab)))
    cp = p - c
    d5, d6 = np.dot(ab, cp), np.dot(ac, cp)
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(cp))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + w * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + w * (c - b))))
    n = np.cross(ab, ac)
    n /= np.linalg.norm(n)
    return abs(float(np.dot(p - a, n)))
