"""Planar geometry primitives shared by the lattice-curve and continuum code."""
from __future__ import annotations

import numpy as np


def signed_area(points: np.ndarray) -> float:
    """Shoelace area of the closed polyline through ``points`` (CCW positive)."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def closed_length(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.float64)
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def open_length(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.float64)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c, tol: float) -> bool:
    # c collinear with a-b assumed
    return (min(a[0], b[0]) - tol <= c[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= c[1] <= max(a[1], b[1]) + tol)


def segments_intersect(a, b, c, d, tol: float = 1e-12) -> bool:
    """Closed segments ab and cd share at least one point."""
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > tol and o2 < -tol) or (o1 < -tol and o2 > tol)) and ((o3 > tol and o4 < -tol) or (o3 < -tol and o4 > tol)):
        return True
    if abs(o1) <= tol and _on_segment(a, b, c, tol):
        return True
    if abs(o2) <= tol and _on_segment(a, b, d, tol):
        return True
    if abs(o3) <= tol and _on_segment(c, d, a, tol):
        return True
    if abs(o4) <= tol and _on_segment(c, d, b, tol):
        return True
    return False


def _segments(points: np.ndarray, closed: bool) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    nxt = np.roll(pts, -1, axis=0) if closed else pts[1:]
    start = pts if closed else pts[:-1]
    return np.stack([start, nxt], axis=1)


def _segment_pair_hits(segs_a: np.ndarray, segs_b: np.ndarray, tol: float) -> np.ndarray:
    """Boolean matrix: segment i of A meets segment j of B (closed segments)."""
    a, b = segs_a[:, None, 0, :], segs_a[:, None, 1, :]
    c, d = segs_b[None, :, 0, :], segs_b[None, :, 1, :]

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    def within(p, q, r):
        return ((np.minimum(p[..., 0], q[..., 0]) - tol <= r[..., 0]) & (r[..., 0] <= np.maximum(p[..., 0], q[..., 0]) + tol)
                & (np.minimum(p[..., 1], q[..., 1]) - tol <= r[..., 1]) & (r[..., 1] <= np.maximum(p[..., 1], q[..., 1]) + tol))

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    proper = (((o1 > tol) & (o2 < -tol)) | ((o1 < -tol) & (o2 > tol))) & (((o3 > tol) & (o4 < -tol)) | ((o3 < -tol) & (o4 > tol)))
    touch = ((np.abs(o1) <= tol) & within(a, b, c)) | ((np.abs(o2) <= tol) & within(a, b, d))
    touch |= ((np.abs(o3) <= tol) & within(c, d, a)) | ((np.abs(o4) <= tol) & within(c, d, b))
    return proper | touch


def is_simple(points: np.ndarray, closed: bool, tol: float = 1e-12) -> bool:
    """No two non-adjacent segments meet and no vertex repeats (consecutive duplicates forbidden)."""
    pts = np.asarray(points, dtype=np.float64)
    k = len(pts)
    if k < 2:
        return True
    segs = _segments(pts, closed)
    lens = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
    if np.any(lens <= tol):
        return False
    m = len(segs)
    if closed and m < 3:
        return False
    chunk = 512
    for s in range(0, m, chunk):
        block = segs[s : s + chunk]
        hits = _segment_pair_hits(block, segs, tol)
        i = np.arange(s, s + len(block))[:, None]
        j = np.arange(m)[None, :]
        adjacent = (np.abs(i - j) <= 1)
        if closed:
            adjacent |= (i == 0) & (j == m - 1) | (i == m - 1) & (j == 0)
        bad = hits & ~adjacent & (j > i)
        if bad.any():
            return False
        # adjacent segments may only share their common endpoint: reject fold-backs
        nxt = (j == i + 1) | (closed & (i == m - 1) & (j == 0))
        if np.any(hits & nxt):
            ii, jj = np.nonzero(hits & nxt)
            for a_, b_ in zip(ii + s, jj):
                p0, p1 = segs[a_]
                q0, q1 = segs[b_]
                cross = (p1[0] - p0[0]) * (q1[1] - q0[1]) - (p1[1] - p0[1]) * (q1[0] - q0[0])
                dot = (p1[0] - p0[0]) * (q1[0] - q0[0]) + (p1[1] - p0[1]) * (q1[1] - q0[1])
                if abs(cross) <= tol and dot < 0:
                    return False
    return True


def curves_intersect(a: np.ndarray, a_closed: bool, b: np.ndarray, b_closed: bool, tol: float = 1e-12) -> bool:
    sa, sb = _segments(a, a_closed), _segments(b, b_closed)
    lo_a, hi_a = np.min(a, axis=0), np.max(a, axis=0)
    lo_b, hi_b = np.min(b, axis=0), np.max(b, axis=0)
    if np.any(hi_a < lo_b - tol) or np.any(hi_b < lo_a - tol):
        return False
    for s in range(0, len(sa), 512):
        if _segment_pair_hits(sa[s : s + 512], sb, tol).any():
            return True
    return False


def winding_numbers(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """Winding number of the closed polyline ``curve`` around each query point.

    Points lying on the curve get an arbitrary value; use :func:`on_curve`.
    """
    q = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    c = np.asarray(curve, dtype=np.float64)
    wn = np.zeros(len(q), dtype=np.int64)
    px, py = q[:, 0], q[:, 1]
    for (x0, y0), (x1, y1) in zip(c, np.roll(c, -1, axis=0)):
        left = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
        up = (y0 <= py) & (y1 > py) & (left > 0)
        down = (y0 > py) & (y1 <= py) & (left < 0)
        wn += up.astype(np.int64) - down.astype(np.int64)
    return wn


def on_curve(points: np.ndarray, curve: np.ndarray, closed: bool = True, tol: float = 1e-12) -> np.ndarray:
    q = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    hit = np.zeros(len(q), dtype=bool)
    for (x0, y0), (x1, y1) in _segments(curve, closed):
        dx, dy = x1 - x0, y1 - y0
        cross = dx * (q[:, 1] - y0) - dy * (q[:, 0] - x0)
        scale = max(abs(dx), abs(dy), 1.0)
        inside = ((np.minimum(x0, x1) - tol <= q[:, 0]) & (q[:, 0] <= np.maximum(x0, x1) + tol)
                  & (np.minimum(y0, y1) - tol <= q[:, 1]) & (q[:, 1] <= np.maximum(y0, y1) + tol))
        hit |= (np.abs(cross) <= tol * scale) & inside
    return hit


def point_segment_distance_linf(points: np.ndarray, a, b) -> np.ndarray:
    """l-infinity distance from each point to the segment ab (exact: convex in t)."""
    q = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    # minimise max(|a_x + t d_x - q_x|, |a_y + t d_y - q_y|) over t in [0, 1]; the
    # optimum sits at an endpoint or where the two components are equal in size
    cands = [np.zeros(len(q)), np.ones(len(q))]
    for sx in (1.0, -1.0):
        denom = d[0] - sx * d[1]
        if abs(denom) > 1e-15:
            t = ((q[:, 0] - a[0]) - sx * (q[:, 1] - a[1])) / denom
            cands.append(np.clip(t, 0.0, 1.0))
    for comp in (0, 1):
        if abs(d[comp]) > 1e-15:
            cands.append(np.clip((q[:, comp] - a[comp]) / d[comp], 0.0, 1.0))
    best = np.full(len(q), np.inf)
    for t in cands:
        px = a[0] + t * d[0]
        py = a[1] + t * d[1]
        best = np.minimum(best, np.maximum(np.abs(px - q[:, 0]), np.abs(py - q[:, 1])))
    return best


def clip_halfplane(points: np.ndarray, normal, offset: float) -> np.ndarray:
    """Convex-polygon clip to {x : <x, normal> <= offset} (Sutherland-Hodgman)."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        return pts
    nx_, ny_ = float(normal[0]), float(normal[1])
    vals = pts[:, 0] * nx_ + pts[:, 1] * ny_ - offset
    out = []
    k = len(pts)
    for i in range(k):
        p, q = pts[i], pts[(i + 1) % k]
        vp, vq = vals[i], vals[(i + 1) % k]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    if not out:
        return np.zeros((0, 2))
    # drop near-duplicate neighbours left by vertices lying on the line
    kept = [out[0]]
    for q in out[1:]:
        if np.max(np.abs(q - kept[-1])) > 1e-12:
            kept.append(q)
    while len(kept) > 1 and np.max(np.abs(kept[-1] - kept[0])) <= 1e-12:
        kept.pop()
    return np.array(kept)
