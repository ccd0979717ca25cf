"""Right-boundary distance b(x, y) and Monte Carlo estimates of the boundary norm."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from perciso._rng import derive_seed
from perciso.lattice import (
    DIRS,
    Config,
    Vertex,
    canonical_edge,
    infinite_cluster_mask,
    nearest_cluster_vertex,
    sample_config,
)
from perciso.rightmost import LatticePath, direction, is_rightmost, path_weight, right_boundary_at, step
from perciso import geometry

EXACT = "exact"
VALIDATED = "relaxed-validated"
UNVALIDATED = "relaxed-unvalidated"

NORM_TABLE_FORMAT = "perciso-normtable"
NORM_TABLE_VERSION = 1


class NoPathError(ValueError):
    pass


@dataclass(frozen=True)
class DistanceResult:
    value: int
    witness: LatticePath
    flag: str


def _open_darts(config: Config) -> np.ndarray:
    """(V, 4) mask of open darts leaving each vertex of the padded box."""
    W = config.width
    V = config.num_vertices
    out = np.zeros((W, W, 4), dtype=bool)
    out[:, :-1, 0] = config.h_open
    out[:, 1:, 2] = config.h_open
    out[:-1, :, 1] = config.v_open
    out[1:, :, 3] = config.v_open
    return out.reshape(V, 4)


@dataclass
class _DartGraph:
    matrix: csr_matrix
    scale: float  # weight = cost * scale + 1
    head: np.ndarray  # head vertex index per dart node


def _dart_graph(config: Config) -> _DartGraph:
    if "dart_graph" in config._cache:
        return config._cache["dart_graph"]
    W = config.width
    V = config.num_vertices
    opened = _open_darts(config)
    offsets = np.array([1, W, -1, -W], dtype=np.int64)
    node_head = (np.arange(V, dtype=np.int64)[:, None] + offsets[None, :]).ravel()
    scale = float(4 * V + 1)
    rows, cols, wts = [], [], []
    for d_in in range(4):
        tails = np.flatnonzero(opened[:, d_in])
        heads = tails + offsets[d_in]
        back = (d_in + 2) % 4
        for d_out in range(4):
            ok = opened[heads, d_out]
            h = heads[ok]
            count = (d_out - back - 1) % 4
            cost = np.zeros(len(h), dtype=np.int64)
            for k in range(1, count + 1):
                cost += opened[h, (back + k) % 4]
            rows.append(tails[ok] * 4 + d_in)
            cols.append(h * 4 + d_out)
            wts.append(cost * scale + 1.0)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    w = np.concatenate(wts)
    g = _DartGraph(csr_matrix((w, (r, c)), shape=(4 * V, 4 * V)), scale, node_head)
    config._cache["dart_graph"] = g
    return g


def _resolve(config: Config, pt) -> Vertex:
    if isinstance(pt, tuple) and len(pt) == 2 and all(isinstance(c, (int, np.integer)) for c in pt):
        v = (int(pt[0]), int(pt[1]))
        if config.in_box(v) and infinite_cluster_mask(config)[config.index(v)]:
            return v
    return nearest_cluster_vertex(config, (float(pt[0]), float(pt[1])))


def _relaxed(config: Config, x: Vertex, y: Vertex) -> tuple[LatticePath, int]:
    g = _dart_graph(config)
    opened = _open_darts(config)
    xi = config.index(x)
    sources = [xi * 4 + d for d in range(4) if opened[xi, d]]
    if not sources:
        raise NoPathError("no open right-most path")
    dist, pred, _ = dijkstra(g.matrix, directed=True, indices=sources, min_only=True, return_predecessors=True)
    targets = []
    for d in range(4):
        u = (y[0] - DIRS[d][0], y[1] - DIRS[d][1])
        if config.in_box(u):
            node = config.index(u) * 4 + d
            if opened[config.index(u), d] and np.isfinite(dist[node]):
                targets.append((dist[node], node))
    if not targets:
        raise NoPathError("no open right-most path")
    best, node = min(targets)
    chain = [node]
    while pred[chain[-1]] >= 0:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    verts = [config.vertex(chain[0] // 4)]
    for nd in chain:
        verts.append(config.vertex(int(g.head[nd])))
    cost = int(round((best - (len(chain) - 1)) / g.scale))
    return LatticePath(tuple(verts)), cost


def _exact(config: Config, x: Vertex, y: Vertex, budget: int) -> tuple[LatticePath, int]:
    """Branch and bound over open right-most paths from x, stopping at first arrival at y."""
    opened = _open_darts(config)

    def is_open(v: Vertex, d: int) -> bool:
        return config.in_box(v) and bool(opened[config.index(v), d])

    used: set = set()
    rb: set = set()
    edge_hits: dict = {}
    best = [math.inf, None]
    verts = [x]
    cost = [0]
    nodes = [0]

    def rec() -> None:
        nodes[0] += 1
        if nodes[0] > budget:
            raise RuntimeError("exact enumeration budget exceeded")
        v = verts[-1]
        if len(verts) > 1 and v == y:
            if cost[0] < best[0]:
                best[0] = cost[0]
                best[1] = tuple(verts)
            return
        if len(verts) > 1:
            d_in = direction(verts[-2], v)
            order = [(d_in - 1) % 4, d_in, (d_in + 1) % 4, (d_in + 2) % 4]
        else:
            order = [0, 1, 2, 3]
        for d in order:
            if not is_open(v, d):
                continue
            w = step(v, d)
            dart = (v, w)
            if dart in used or dart in rb:
                continue
            sweep = right_boundary_at(verts[-2], v, w) if len(verts) > 1 else []
            if any(s in used for s in sweep):
                continue
            added = [s for s in sweep if s not in rb]
            new_edges = []
            for s in added:
                if is_open(s[0], direction(*s)):
                    e = canonical_edge(*s)
                    edge_hits[e] = edge_hits.get(e, 0) + 1
                    if edge_hits[e] == 1:
                        new_edges.append(e)
            extra = len(new_edges)
            if cost[0] + extra < best[0]:
                used.add(dart)
                rb.update(added)
                verts.append(w)
                cost[0] += extra
                rec()
                cost[0] -= extra
                verts.pop()
                rb.difference_update(added)
                used.discard(dart)
            for s in added:
                if is_open(s[0], direction(*s)):
                    e = canonical_edge(*s)
                    edge_hits[e] -= 1
                    if edge_hits[e] == 0:
                        del edge_hits[e]

    rec()
    if best[1] is None:
        raise NoPathError("no open right-most path")
    return LatticePath(best[1]), int(best[0])


def right_boundary_distance(config: Config, x, y, mode: str = "dijkstra_relaxation", budget: int = 20_000_000) -> DistanceResult:
    """b([x], [y]): least number of open right-boundary edges over open right-most paths.

    Integer tuples already in the infinite cluster are used as-is; other points
    are snapped to their nearest cluster vertex.
    """
    vx, vy = _resolve(config, x), _resolve(config, y)
    if vx == vy:
        return DistanceResult(0, LatticePath((vx,)), EXACT)
    if mode == "exact_enumeration":
        path, value = _exact(config, vx, vy, budget)
        return DistanceResult(value, path, EXACT)
    if mode != "dijkstra_relaxation":
        raise ValueError(f"unknown mode {mode!r}")
    path, additive = _relaxed(config, vx, vy)
    if is_rightmost(path):
        return DistanceResult(path_weight(path, config, "infinite"), path, VALIDATED)
    return DistanceResult(additive, path, UNVALIDATED)


# -- beta estimation -----------------------------------------------------------


def fold_direction(v) -> tuple[float, float]:
    """Representative of v's orbit under the square symmetries in the arc 0 <= angle <= pi/4."""
    a, b = abs(float(v[0])), abs(float(v[1]))
    return (a, b) if a >= b else (b, a)


@dataclass
class BetaEstimate:
    beta: float
    stderr: float
    scales: list[int]
    scale_means: list[float]
    scale_stderrs: list[float]
    censored: int = 0
    unvalidated: int = 0

    def __iter__(self):
        return iter((self.beta, self.stderr))


def _mean_se(vals: list[float]) -> tuple[float, float]:
    if not vals:
        return math.nan, math.nan
    arr = np.asarray(vals, dtype=np.float64)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def estimate_beta(p: float, direction, scales, replicas: int, seed: int, pad: int | None = None) -> BetaEstimate:
    if p <= 0.5:
        raise ValueError("supercritical parameter required (p > 1/2)")
    scales = [int(s) for s in scales]
    if not scales or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be a non-empty increasing list")
    if replicas <= 0:
        raise ValueError("replicas must be positive")
    u = fold_direction(direction)
    r = math.hypot(*u)
    if r == 0:
        raise ValueError("direction must be nonzero")
    u = (u[0] / r, u[1] / r)
    means, ses = [], []
    censored = unvalidated = 0
    for s in scales:
        vals = []
        for k in range(replicas):
            cfg = sample_config(s, p, derive_seed(seed, 0xBE7A, s, k), pad=pad)
            try:
                res = right_boundary_distance(cfg, (0.0, 0.0), (s * u[0], s * u[1]))
            except (NoPathError, ValueError):
                censored += 1
                continue
            if res.flag == UNVALIDATED:
                unvalidated += 1
            vals.append(res.value / s)
        m, se = _mean_se(vals)
        means.append(m)
        ses.append(se)
    return BetaEstimate(means[-1], ses[-1], scales, means, ses, censored, unvalidated)


@dataclass
class NormTable:
    """Boundary-norm estimates on the first-octant arc, extended by symmetry and homogeneity."""

    p: float
    angles: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    scales: list[int] = field(default_factory=list)
    replicas: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.stderrs = np.asarray(self.stderrs, dtype=np.float64)
        if len(self.angles) < 2 or self.angles[0] != 0.0 or not math.isclose(self.angles[-1], math.pi / 4):
            raise ValueError("angular grid must span [0, pi/4] with at least two points")
        if np.any(self.values <= 0):
            raise ValueError("norm values must be positive")

    @property
    def resolution(self) -> int:
        return len(self.angles)

    def _folded_angle(self, u, w):
        a, b = np.abs(u), np.abs(w)
        return np.arctan2(np.minimum(a, b), np.maximum(a, b))

    def __call__(self, u, w=None):
        if w is None:
            u, w = u[0], u[1]
        u = np.asarray(u, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        out = np.hypot(u, w) * np.interp(self._folded_angle(u, w), self.angles, self.values)
        return float(out) if out.ndim == 0 else out

    def stderr_at(self, u, w):
        return np.hypot(u, w) * np.interp(self._folded_angle(u, w), self.angles, self.stderrs)

    def convexity_violation(self, samples: int = 720) -> float:
        """Largest excess of the norm at a chord midpoint over the chord's average (<= 0 when convex)."""
        t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        # points on the estimated unit sphere
        ux, uy = np.cos(t), np.sin(t)
        r = 1.0 / self(ux, uy)
        px, py = ux * r, uy * r
        worst = -np.inf
        for shift in range(1, samples // 2 + 1):
            mx = 0.5 * (px + np.roll(px, shift))
            my = 0.5 * (py + np.roll(py, shift))
            worst = max(worst, float(np.max(self(mx, my) - 1.0)))
        return worst

    def triangle_violations(self, pairs: int = 1000, seed: int = 0, sigmas: float = 3.0) -> int:
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(pairs, 2))
        b = rng.normal(size=(pairs, 2))
        s = a + b
        lhs = self(s[:, 0], s[:, 1])
        rhs = self(a[:, 0], a[:, 1]) + self(b[:, 0], b[:, 1])
        slack = sigmas * (self.stderr_at(a[:, 0], a[:, 1]) + self.stderr_at(b[:, 0], b[:, 1]) + self.stderr_at(s[:, 0], s[:, 1]))
        return int(np.sum(lhs > rhs + slack + 1e-12))

    def to_dict(self) -> dict:
        return {
            "format": NORM_TABLE_FORMAT,
            "version": NORM_TABLE_VERSION,
            "p": self.p,
            "resolution": self.resolution,
            "scales": list(self.scales),
            "replicas": self.replicas,
            "seed": self.seed,
            "rows": [[float(a), float(v), float(e)] for a, v, e in zip(self.angles, self.values, self.stderrs)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormTable":
        if data.get("format") != NORM_TABLE_FORMAT:
            raise ValueError("not a norm table")
        if data.get("version") != NORM_TABLE_VERSION:
            raise ValueError(f"unsupported norm table version {data.get('version')}")
        rows = np.array(data["rows"], dtype=np.float64)
        if len(rows) != data["resolution"]:
            raise ValueError("row count does not match resolution")
        return cls(data["p"], rows[:, 0], rows[:, 1], rows[:, 2], list(data["scales"]), int(data["replicas"]), int(data["seed"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NormTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_norm_table(p: float, resolution: int, scales, replicas: int, seed: int, pad: int | None = None) -> NormTable:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    angles = np.linspace(0.0, math.pi / 4, resolution)
    vals, ses = [], []
    for i, th in enumerate(angles):
        est = estimate_beta(p, (math.cos(th), math.sin(th)), scales, replicas, derive_seed(seed, 0x7AB1E, i), pad=pad)
        vals.append(est.beta)
        ses.append(est.stderr)
    return NormTable(p, angles, np.array(vals), np.array(ses), list(scales), replicas, seed)


# -- diagnostics -------------------------------------------------------------


@dataclass
class ConcentrationReport:
    distance: int
    witness: LatticePath
    flag: str
    deviation: float  # l-infinity Hausdorff distance to the straight segment, over |y - x|_2
    epsilon: float


def _hausdorff_to_segment(points: np.ndarray, a, b, spacing: float = 0.125) -> float:
    pts = np.asarray(points, dtype=np.float64)
    # the distance to a segment is convex along each polyline piece, so vertices suffice
    d1 = float(geometry.point_segment_distance_linf(pts, a, b).max())
    seg_len = math.hypot(b[0] - a[0], b[1] - a[1])
    k = max(2, int(math.ceil(seg_len / spacing)) + 1)
    t = np.linspace(0.0, 1.0, k)
    samples = np.column_stack([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    best = np.full(k, np.inf)
    if len(pts) == 1:
        best = np.max(np.abs(samples - pts[0]), axis=1)
    for p0, p1 in zip(pts, pts[1:]):
        best = np.minimum(best, geometry.point_segment_distance_linf(samples, p0, p1))
    return max(d1, float(best.max()))


def geodesic_concentration(config: Config, x, y, epsilon: float = 0.0) -> ConcentrationReport:
    res = right_boundary_distance(config, x, y)
    xs = (float(x[0]), float(x[1]))
    ys = (float(y[0]), float(y[1]))
    span = math.hypot(ys[0] - xs[0], ys[1] - xs[1])
    if span == 0:
        return ConcentrationReport(res.value, res.witness, res.flag, 0.0, epsilon)
    dev = _hausdorff_to_segment(np.array(res.witness.vertices), xs, ys)
    return ConcentrationReport(res.value, res.witness, res.flag, dev / span, epsilon)


@dataclass
class LengthComparison:
    ratios: list[float]
    lengths: list[int]

    @property
    def minimum(self) -> float:
        return min(self.ratios) if self.ratios else math.nan

    @property
    def median(self) -> float:
        return median(self.ratios) if self.ratios else math.nan


def length_comparison(p: float, distance: int, samples: int, seed: int, min_length: int = 20) -> LengthComparison:
    """Ratios |b(witness)| / |witness| for geodesics between points ``distance`` apart."""
    rng = np.random.default_rng(derive_seed(seed, 0x1E6))
    ratios, lengths = [], []
    for k in range(samples):
        cfg = sample_config(distance, p, derive_seed(seed, 0x1E7, k))
        th = rng.uniform(0, 2 * math.pi)
        half = 0.5 * distance
        a = (-half * math.cos(th), -half * math.sin(th))
        b = (half * math.cos(th), half * math.sin(th))
        res = right_boundary_distance(cfg, a, b)
        if res.flag == UNVALIDATED or len(res.witness) < min_length:
            continue
        ratios.append(res.value / len(res.witness))
        lengths.append(len(res.witness))
    return LengthComparison(ratios, lengths)
