"""Bond percolation on a padded box of Z^2.

A :class:`Config` covers the box [-N, N]^2 with N = n + pad. Edge states and
vertex tie-break values are pure functions of the seed and the absolute edge or
vertex coordinates, so two configs with the same seed agree on every edge they
share, and configs at different p with the same seed are monotonically coupled.

Vertices are addressed by flat index ``(y + N) * W + (x + N)`` with W = 2N + 1.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from perciso._rng import derive_seed, uniforms

Vertex = tuple[int, int]
Edge = tuple[Vertex, Vertex]

# direction index -> unit step; counter-clockwise order starting east
DIRS: tuple[Vertex, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))

MAX_VERTICES = 1 << 28
SNAPSHOT_MAGIC = b"PCFG"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sHIIdQ")

_KIND_H, _KIND_V, _KIND_ETA = 0, 1, 2


class CapacityError(ValueError):
    """Requested box does not fit the addressable vertex space."""


def canonical_edge(a: Vertex, b: Vertex) -> Edge:
    if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
        raise ValueError(f"{a} and {b} are not nearest neighbours")
    return (a, b) if a < b else (b, a)


@dataclass(eq=False)
class Config:
    """A sampled percolation configuration. Treat as immutable."""

    n: int
    pad: int
    p: float
    seed: int
    h_open: np.ndarray  # (W, W-1): edge (x, y)-(x+1, y) at [y+N, x+N]
    v_open: np.ndarray  # (W-1, W): edge (x, y)-(x, y+1) at [y+N, x+N]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return self.n + self.pad

    @property
    def width(self) -> int:
        return 2 * self.N + 1

    @property
    def num_vertices(self) -> int:
        return self.width * self.width

    def index(self, v: Vertex) -> int:
        N = self.N
        return (v[1] + N) * self.width + (v[0] + N)

    def vertex(self, idx: int) -> Vertex:
        W, N = self.width, self.N
        return (int(idx % W) - N, int(idx // W) - N)

    def coords(self, idx: np.ndarray) -> np.ndarray:
        """Flat indices -> (k, 2) integer coordinates."""
        idx = np.asarray(idx, dtype=np.int64)
        W, N = self.width, self.N
        return np.stack([idx % W - N, idx // W - N], axis=-1)

    def in_box(self, v: Vertex) -> bool:
        N = self.N
        return -N <= v[0] <= N and -N <= v[1] <= N

    def in_inner(self, v: Vertex) -> bool:
        n = self.n
        return -n <= v[0] <= n and -n <= v[1] <= n

    def is_open(self, a: Vertex, b: Vertex) -> bool:
        """State of the edge {a, b}; edges leaving the padded box count as closed."""
        if not (self.in_box(a) and self.in_box(b)):
            return False
        (x1, y1), (x2, y2) = canonical_edge(a, b)
        N = self.N
        if y1 == y2:
            return bool(self.h_open[y1 + N, x1 + N])
        return bool(self.v_open[y1 + N, x1 + N])

    def open_neighbors(self, v: Vertex) -> list[Vertex]:
        out = []
        for dx, dy in DIRS:
            w = (v[0] + dx, v[1] + dy)
            if self.is_open(v, w):
                out.append(w)
        return out

    def eta(self, v: Vertex) -> float:
        return float(uniforms(self.seed, _KIND_ETA, np.array([v[0]]), np.array([v[1]]))[0])

    def eta_array(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.int64).reshape(-1, 2)
        return uniforms(self.seed, _KIND_ETA, xy[:, 0], xy[:, 1])

    def open_edge_index_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat-index endpoints (a, b) of every open edge, horizontal first."""
        key = "open_pairs"
        if key not in self._cache:
            W = self.width
            hy, hx = np.nonzero(self.h_open)
            vy, vx = np.nonzero(self.v_open)
            a = np.concatenate([hy * W + hx, vy * W + vx])
            b = np.concatenate([hy * W + hx + 1, (vy + 1) * W + vx])
            self._cache[key] = (a.astype(np.int64), b.astype(np.int64))
        return self._cache[key]

    def open_fraction(self) -> float:
        total = self.h_open.size + self.v_open.size
        return float(self.h_open.sum() + self.v_open.sum()) / total if total else 0.0


def sample_config(n: int, p: float, seed: int, pad: int | None = None) -> Config:
    """Sample bond percolation on [-(n+pad), n+pad]^2; ``pad`` defaults to n."""
    if pad is None:
        pad = n
    if n < 1:
        raise ValueError("n must be at least 1")
    if pad < 0:
        raise ValueError("pad must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    N = n + pad
    W = 2 * N + 1
    if W * W > MAX_VERTICES or N >= (1 << 29):
        raise CapacityError(f"box of radius {N} exceeds {MAX_VERTICES} vertices")
    ys, xs = np.mgrid[-N : N + 1, -N:N]
    h_open = uniforms(seed, _KIND_H, xs, ys) < p
    ys, xs = np.mgrid[-N:N, -N : N + 1]
    v_open = uniforms(seed, _KIND_V, xs, ys) < p
    return Config(n=n, pad=pad, p=float(p), seed=int(seed), h_open=h_open, v_open=v_open)


@dataclass(eq=False)
class ClusterLabeling:
    labels: np.ndarray  # per flat vertex index; ids ordered by smallest member index
    sizes: np.ndarray
    largest: int

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cid)


def cluster(config: Config) -> ClusterLabeling:
    """Open clusters of the padded box."""
    if "clusters" in config._cache:
        return config._cache["clusters"]
    V = config.num_vertices
    a, b = config.open_edge_index_pairs()
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(V, V)).tocsr()
    _, raw = connected_components(graph, directed=False)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    labels = rank[inverse.ravel()].astype(np.int64)
    sizes = np.bincount(labels, minlength=len(order))
    result = ClusterLabeling(labels=labels, sizes=sizes, largest=int(np.argmax(sizes)))
    config._cache["clusters"] = result
    return result


def infinite_cluster_mask(config: Config) -> np.ndarray:
    """Flat mask of the largest padded-box cluster, our stand-in for the infinite cluster."""
    lab = cluster(config)
    return lab.labels == lab.largest


def inner_mask(config: Config) -> np.ndarray:
    N, n, W = config.N, config.n, config.width
    ys, xs = np.divmod(np.arange(config.num_vertices), W)
    xs, ys = xs - N, ys - N
    return (np.abs(xs) <= n) & (np.abs(ys) <= n)


@dataclass(eq=False)
class Subgraph:
    """A vertex subset of the giant component, stored as sorted flat indices."""

    config: Config
    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.unique(np.asarray(self.vertices, dtype=np.int64))
        self.vertices = v

    @property
    def n(self) -> int:
        return self.config.n

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, v: Vertex) -> bool:
        if not self.config.in_box(v):
            return False
        return bool(self.mask[self.config.index(v)])

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.config.num_vertices, dtype=bool)
        m[self.vertices] = True
        return m

    def coords(self) -> list[Vertex]:
        return [tuple(int(c) for c in row) for row in self.config.coords(self.vertices)]

    def vertex_set(self) -> set[Vertex]:
        return set(self.coords())


def _components_of(config: Config, mask: np.ndarray) -> np.ndarray:
    """Connected-component labels (-1 outside ``mask``) of the open subgraph induced on ``mask``."""
    V = config.num_vertices
    a, b = config.open_edge_index_pairs()
    keep = mask[a] & mask[b]
    g = coo_matrix((np.ones(int(keep.sum()), dtype=np.int8), (a[keep], b[keep])), shape=(V, V)).tocsr()
    _, lab = connected_components(g, directed=False)
    lab = lab.astype(np.int64)
    lab[~mask] = -1
    return lab


def giant_component(config: Config) -> Subgraph:
    """Largest connected piece of the infinite-cluster trace on [-n, n]^2."""
    if config.p <= 0.5:
        raise ValueError("supercritical parameter required (p > 1/2)")
    if "giant" in config._cache:
        return config._cache["giant"]
    trace = infinite_cluster_mask(config) & inner_mask(config)
    if not trace.any():
        raise ValueError("no giant component at this scale")
    lab = _components_of(config, trace)
    ids = lab[trace]
    idx = np.flatnonzero(trace)
    sizes = np.bincount(ids)
    best = np.flatnonzero(sizes == sizes.max())
    if len(best) > 1:
        # tie: component holding the lexicographically smallest (x, y)
        xy = config.coords(idx)
        lex = xy[:, 0] * config.width + xy[:, 1]
        best_lex = {int(c): np.inf for c in best}
        for c in best:
            best_lex[int(c)] = lex[ids == c].min()
        chosen = min(best_lex, key=best_lex.get)
    else:
        chosen = int(best[0])
    sub = Subgraph(config, idx[ids == chosen])
    config._cache["giant"] = sub
    return sub


def make_subgraph(config: Config, vertices: Iterable[Vertex], check: bool = True) -> Subgraph:
    """Subgraph from lattice coordinates, optionally verifying membership in C_n."""
    vs = list(vertices)
    if not vs:
        raise ValueError("empty vertex set")
    for v in vs:
        if not config.in_inner(v):
            raise ValueError(f"vertex {v} lies outside [-n, n]^2")
    idx = np.array([config.index(v) for v in vs], dtype=np.int64)
    sub = Subgraph(config, idx)
    if check:
        g = giant_component(config).mask
        if not g[sub.vertices].all():
            raise ValueError("subgraph vertices must lie in the giant component")
    return sub


def edge_boundary(U: Subgraph, mode: str = "within_box") -> set[Edge]:
    """Open edges with exactly one endpoint in U.

    ``within_box`` keeps edges whose other endpoint lies in C_n; ``infinite``
    keeps edges whose other endpoint lies in the infinite-cluster trace.
    """
    if len(U) == 0:
        raise ValueError("U must be nonempty")
    config = U.config
    if mode == "within_box":
        host = giant_component(config).mask
    elif mode == "infinite":
        host = infinite_cluster_mask(config)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inside = U.mask
    a, b = config.open_edge_index_pairs()
    cross = (inside[a] & ~inside[b] & host[b]) | (inside[b] & ~inside[a] & host[a])
    out = set()
    for i, j in zip(a[cross], b[cross]):
        out.add(canonical_edge(config.vertex(int(i)), config.vertex(int(j))))
    return out


def boundary_size(U: Subgraph, mode: str = "within_box") -> int:
    return len(edge_boundary(U, mode))


def conductance(U: Subgraph, mode: str = "within_box") -> Fraction:
    """|boundary| / |U| as an exact fraction (``float()`` it for the real value)."""
    return Fraction(boundary_size(U, mode), len(U))


def density_estimate(p: float, radius: int, replicas: int, seed: int, pad: int | None = None) -> tuple[float, float]:
    """Mean fraction of [-radius, radius]^2 covered by the largest padded cluster."""
    if replicas <= 0:
        raise ValueError("replicas must be positive")
    if p <= 0.5:
        raise ValueError("supercritical parameter required (p > 1/2)")
    fracs = []
    for r in range(replicas):
        cfg = sample_config(radius, p, derive_seed(seed, 0xD5, r), pad)
        trace = infinite_cluster_mask(cfg) & inner_mask(cfg)
        fracs.append(trace.sum() / (2 * radius + 1) ** 2)
    arr = np.asarray(fracs, dtype=np.float64)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), stderr


def nearest_cluster_vertex(config: Config, x: tuple[float, float]) -> Vertex:
    """l-infinity nearest vertex of the infinite-cluster trace to a point of R^2.

    Ties go to the smallest tie-break value eta, then to the smallest flat index.
    """
    member = infinite_cluster_mask(config)
    if not member.any():
        raise ValueError("no cluster vertex available")
    N = config.N
    cx, cy = float(x[0]), float(x[1])
    R = 1
    while True:
        x0, x1 = max(-N, math.floor(cx - R)), min(N, math.ceil(cx + R))
        y0, y1 = max(-N, math.floor(cy - R)), min(N, math.ceil(cy + R))
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        xs, ys = xs.ravel(), ys.ravel()
        idx = (ys + N) * config.width + (xs + N)
        hit = member[idx]
        if hit.any():
            d = np.maximum(np.abs(xs - cx), np.abs(ys - cy))[hit]
            dmin = d.min()
            # the window holds every box vertex within distance R of x
            if dmin <= R:
                cand = idx[hit][d == dmin]
                if len(cand) == 1:
                    return config.vertex(int(cand[0]))
                etas = config.eta_array(config.coords(cand))
                order = np.lexsort((cand, etas))
                return config.vertex(int(cand[order[0]]))
        if x0 == -N and x1 == N and y0 == -N and y1 == N:
            raise ValueError("no cluster vertex available")
        R *= 2


def save_config(config: Config, path: str | Path) -> None:
    """Binary snapshot: header then packed edge bitmaps (horizontal, then vertical)."""
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, config.n, config.pad, config.p, config.seed & ((1 << 64) - 1))
    body = np.packbits(config.h_open.ravel()).tobytes() + np.packbits(config.v_open.ravel()).tobytes()
    Path(path).write_bytes(header + body)


def load_config(path: str | Path) -> Config:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot")
    magic, version, n, pad, p, seed = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a configuration snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    W = 2 * (n + pad) + 1
    nh = W * (W - 1)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size))
    hbytes = (nh + 7) // 8
    if len(bits) < 8 * hbytes + nh:
        raise ValueError("truncated snapshot body")
    h_open = bits[:nh].astype(bool).reshape(W, W - 1)
    v_open = bits[8 * hbytes : 8 * hbytes + nh].astype(bool).reshape(W - 1, W)
    return Config(n=n, pad=pad, p=p, seed=seed, h_open=h_open, v_open=v_open)
