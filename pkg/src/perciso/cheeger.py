"""Cheeger constants of host graphs: exact brute force, an uncapped lower bound, and a search upper bound."""
from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Sequence

import networkx as nx
import numpy as np

from perciso._rng import derive_seed
from perciso.lattice import Config, Subgraph, giant_component

EXACT_THRESHOLD = 22


@dataclass
class HostGraph:
    """Undirected simple graph on vertices 0..V-1 with optional labels and planar coordinates."""

    num_vertices: int
    edges: np.ndarray  # (E, 2) int64, each undirected edge once
    labels: list = field(default_factory=list)
    coords: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if not self.labels:
            self.labels = list(range(self.num_vertices))
        nbrs: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for a, b in self.edges.tolist():
            if a == b:
                raise ValueError("self-loops are not allowed")
            nbrs[a].append(b)
            nbrs[b].append(a)
        self.neighbors = nbrs
        self.degree = np.array([len(x) for x in nbrs], dtype=np.int64)

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Sequence[tuple[int, int]]) -> "HostGraph":
        return cls(num_vertices, np.array(list(edges), dtype=np.int64))

    @classmethod
    def from_subgraph(cls, sub: Subgraph) -> "HostGraph":
        """Open-edge graph induced on the vertices of ``sub``; labels are lattice coordinates."""
        config = sub.config
        pos = -np.ones(config.num_vertices, dtype=np.int64)
        pos[sub.vertices] = np.arange(len(sub.vertices))
        a, b = config.open_edge_index_pairs()
        keep = (pos[a] >= 0) & (pos[b] >= 0)
        edges = np.column_stack([pos[a[keep]], pos[b[keep]]])
        xy = config.coords(sub.vertices)
        labels = [(int(x), int(y)) for x, y in xy]
        return cls(len(sub.vertices), edges, labels, xy.astype(np.float64))

    @classmethod
    def from_config(cls, config: Config) -> "HostGraph":
        return cls.from_subgraph(giant_component(config))

    def boundary(self, members) -> int:
        inside = np.zeros(self.num_vertices, dtype=bool)
        inside[list(members)] = True
        return int(np.sum(inside[self.edges[:, 0]] != inside[self.edges[:, 1]]))

    def is_connected(self) -> bool:
        if self.num_vertices == 0:
            return False
        seen = {0}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in self.neighbors[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.num_vertices

    def components(self, members) -> list[list[int]]:
        mem = set(members)
        out = []
        seen: set[int] = set()
        for s in sorted(mem):
            if s in seen:
                continue
            comp = [s]
            seen.add(s)
            queue = deque([s])
            while queue:
                v = queue.popleft()
                for w in self.neighbors[v]:
                    if w in mem and w not in seen:
                        seen.add(w)
                        comp.append(w)
                        queue.append(w)
            out.append(sorted(comp))
        return out

    @property
    def cap(self) -> int:
        return self.num_vertices // 2


@dataclass
class CheegerResult:
    phi_upper: Fraction
    phi_lower: Fraction
    optimizers: list[tuple[int, ...]]  # host vertex ids, each sorted
    upper_method: str
    lower_method: str
    host_size: int
    labels: list = field(default_factory=list, repr=False)

    def optimizer_labels(self) -> list[list[Hashable]]:
        return [[self.labels[i] for i in opt] for opt in self.optimizers]

    def to_dict(self) -> dict:
        return {
            "phi_upper": str(self.phi_upper),
            "phi_upper_real": float(self.phi_upper),
            "phi_lower": str(self.phi_lower),
            "phi_lower_real": float(self.phi_lower),
            "upper_method": self.upper_method,
            "lower_method": self.lower_method,
            "host_size": self.host_size,
            "optimizers": [[list(lab) if isinstance(lab, tuple) else lab for lab in opt] for opt in self.optimizer_labels()],
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


# -- exact ------------------------------------------------------------------


def cheeger_exact(host: HostGraph, threshold: int = EXACT_THRESHOLD) -> CheegerResult:
    V = host.num_vertices
    if V > threshold:
        raise ValueError(f"host has {V} vertices; exhaustive search is limited to {threshold}")
    if V < 2:
        raise ValueError("host needs at least two vertices")
    cap = V // 2
    best_b, best_s = None, None
    chunk = 1 << 18
    total = 1 << V
    found: list[np.ndarray] = []
    for start in range(1, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.uint32)
        sizes = np.bitwise_count(masks).astype(np.int64)
        ok = sizes <= cap
        masks, sizes = masks[ok], sizes[ok]
        if len(masks) == 0:
            continue
        bnd = np.zeros(len(masks), dtype=np.int64)
        for a, b in host.edges.tolist():
            bnd += ((masks >> np.uint32(a)) ^ (masks >> np.uint32(b))) & np.uint32(1)
        # minimise bnd/sizes exactly: compare cross products against the incumbent
        i = int(np.argmin(bnd / sizes))
        b0, s0 = int(bnd[i]), int(sizes[i])
        if best_b is None or b0 * best_s < best_b * s0:
            best_b, best_s = b0, s0
            found = []
        tie = bnd * best_s == best_b * sizes
        if tie.any():
            found.append(masks[tie])
    phi = Fraction(best_b, best_s)
    opts = []
    for arr in found:
        for m in arr.tolist():
            members = tuple(i for i in range(V) if (m >> i) & 1)
            if Fraction(host.boundary(members), len(members)) == phi:
                opts.append(members)
    opts = sorted(set(opts))
    return CheegerResult(phi, phi, opts, "exact", "exact", V, host.labels)


# -- uncapped lower bound --------------------------------------------------------


def _bridges(host: HostGraph) -> bool:
    g = nx.Graph()
    g.add_nodes_from(range(host.num_vertices))
    g.add_edges_from(host.edges.tolist())
    return nx.has_bridges(g)


def _pinned_min(host: HostGraph, lam: Fraction) -> tuple[Fraction, tuple[int, ...] | None]:
    """min over nonempty proper H of |dH| - lam |H|, scanning every vertex as the excluded pin."""
    V = host.num_vertices
    a, b = lam.numerator, lam.denominator
    g = nx.DiGraph()
    for u, v in host.edges.tolist():
        g.add_edge(u, v, capacity=b)
        g.add_edge(v, u, capacity=b)
    for v in range(V):
        g.add_edge("s", v, capacity=a)
    best = Fraction(0)
    best_set = None
    for pin in range(V):
        g.add_edge(pin, "t")  # no capacity attribute: infinite
        cut, (src, _) = nx.minimum_cut(g, "s", "t")
        g.remove_edge(pin, "t")
        val = Fraction(cut, b) - lam * V
        H = tuple(sorted(x for x in src if x != "s"))
        if val < best and H:
            best, best_set = val, H
    return best, best_set


def uncapped_minimizer(host: HostGraph) -> tuple[Fraction, tuple[int, ...], str]:
    if host.num_vertices < 2:
        raise ValueError("host needs at least two vertices")
    if not host.is_connected():
        raise ValueError("host must be connected")
    V = host.num_vertices
    deg_min = int(host.degree.min())
    v_min = int(np.argmin(host.degree))
    rest = tuple(i for i in range(V) if i != v_min)
    # any proper subset is cut by at least the edge connectivity, and holds at most V-1 vertices
    if deg_min == 1:
        return Fraction(1, V - 1), rest, "degree-one"
    if deg_min == 2 and not _bridges(host):
        return Fraction(2, V - 1), rest, "bridgeless"
    lam = Fraction(deg_min, V - 1)
    H = rest
    while True:
        val, cand = _pinned_min(host, lam)
        if cand is None or val >= 0:
            return lam, H, "dinkelbach"
        H = cand
        lam = Fraction(host.boundary(H), len(H))


def cheeger_lower_uncapped(host: HostGraph) -> Fraction:
    """Minimum of |dH|/|H| over all nonempty proper H, a lower bound on the Cheeger constant."""
    return uncapped_minimizer(host)[0]


# -- search -------------------------------------------------------------------


class _State:
    __slots__ = ("host", "inside", "nbr_in", "size", "bnd", "frontier", "pos")

    def __init__(self, host: HostGraph, members) -> None:
        self.host = host
        V = host.num_vertices
        self.inside = bytearray(V)
        self.nbr_in = [0] * V
        self.size = 0
        self.bnd = 0
        self.frontier: list[int] = []
        self.pos = [-1] * V
        for v in members:
            self.flip(v)

    def _in_frontier(self, v: int) -> bool:
        if self.inside[v]:
            return self.nbr_in[v] < self.host.degree[v]
        return self.nbr_in[v] > 0

    def _refresh(self, v: int) -> None:
        want = self._in_frontier(v)
        if want and self.pos[v] < 0:
            self.pos[v] = len(self.frontier)
            self.frontier.append(v)
        elif not want and self.pos[v] >= 0:
            i = self.pos[v]
            last = self.frontier.pop()
            if last != v:
                self.frontier[i] = last
                self.pos[last] = i
            self.pos[v] = -1

    def delta(self, v: int) -> tuple[int, int]:
        d = int(self.host.degree[v]) - 2 * self.nbr_in[v]
        return (-d, -1) if self.inside[v] else (d, 1)

    def flip(self, v: int) -> None:
        db, ds = self.delta(v)
        self.bnd += db
        self.size += ds
        self.inside[v] ^= 1
        step = 1 if self.inside[v] else -1
        for w in self.host.neighbors[v]:
            self.nbr_in[w] += step
            self._refresh(w)
        self._refresh(v)

    def members(self) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self.inside) if x)


def _prefix_best(host: HostGraph, order: Sequence[int], cap: int) -> tuple[int, int, int]:
    """Best (boundary, size, prefix length) over prefixes of ``order`` up to the cap."""
    inside = bytearray(host.num_vertices)
    bnd = 0
    best = None
    for k, v in enumerate(order[:cap], start=1):
        nin = 0
        for w in host.neighbors[v]:
            nin += inside[w]
        bnd += int(host.degree[v]) - 2 * nin
        inside[v] = 1
        if best is None or bnd * best[1] < best[0] * k:
            best = (bnd, k, k)
    return best


def _bfs_order(host: HostGraph, start: int, allowed=None) -> list[int]:
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in host.neighbors[v]:
            if w not in seen and (allowed is None or w in allowed):
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


GREEDY_LIMIT = 64


def _greedy_order(host: HostGraph, start: int, limit: int = GREEDY_LIMIT) -> list[int]:
    """Grow from ``start``, each time adding the neighbour that raises the boundary least."""
    inside = {start}
    order = [start]
    links: dict[int, int] = {}  # frontier vertex -> edges into the current set
    for w in host.neighbors[start]:
        links[int(w)] = links.get(int(w), 0) + 1
    while links and len(order) < limit:
        v = min(links, key=lambda w: (int(host.degree[w]) - 2 * links[w], w))
        del links[v]
        inside.add(v)
        order.append(v)
        for w in host.neighbors[v]:
            w = int(w)
            if w not in inside:
                links[w] = links.get(w, 0) + 1
    return order


def _seed_orders(host: HostGraph, rng: random.Random, uncapped_set) -> list[tuple[str, list[int]]]:
    V = host.num_vertices
    orders: list[tuple[str, list[int]]] = []
    idx = np.arange(V)
    if host.coords is not None:
        x, y = host.coords[:, 0], host.coords[:, 1]
        for sx in (1, -1):
            for sy in (1, -1):
                orders.append(("half-box", list(np.lexsort((sy * y, sx * x)))))
                orders.append(("half-box", list(np.lexsort((sx * x, sy * y)))))
        lo, hi = host.coords.min(axis=0), host.coords.max(axis=0)
        for cx in (lo[0], hi[0]):
            for cy in (lo[1], hi[1]):
                dx, dy = np.abs(x - cx), np.abs(y - cy)
                orders.append(("corner-square", list(np.lexsort((dx + dy, np.maximum(dx, dy))))))
                orders.append(("corner-disc", list(np.lexsort((idx, dx * dx + dy * dy)))))
                orders.append(("corner-triangle", list(np.lexsort((np.maximum(dx, dy), dx + dy)))))
    if uncapped_set:
        allowed = set(uncapped_set)
        start = min(allowed, key=lambda v: (host.degree[v], v))
        orders.append(("uncapped-trimmed", _bfs_order(host, start, allowed)))
    starts = list(range(V)) if V <= 200 else rng.sample(range(V), 50)
    for s in starts:
        orders.append(("bfs", _bfs_order(host, s)))
        orders.append(("greedy", _greedy_order(host, s)))
    return [(name, [int(v) for v in o]) for name, o in orders]


TABU_SHARE = 40  # one part in TABU_SHARE of the budget goes to the tabu phase
TABU_TENURE = 5


def _better(b1: int, s1: int, b2: int, s2: int) -> bool:
    return b1 * s2 < b2 * s1


def cheeger_search(
    host: HostGraph,
    budget: int = 20_000,
    seed: int = 0,
    restarts: int = 4,
    tolerance: float = 1e-9,
    max_optimizers: int = 64,
) -> CheegerResult:
    """Annealed local search for the capped Cheeger constant, with the uncapped bound below it.

    ``budget`` counts proposed flips across all restarts; a 1/TABU_SHARE part
    of it is spent on a closing tabu search from the best set found, which gets
    past the near-ties annealing tends to freeze in on dense hosts. The result
    is a deterministic function of the host, budget and seed.
    """
    V = host.num_vertices
    if V < 2 or not host.is_connected():
        raise ValueError("host must be connected with at least two vertices")
    cap = host.cap
    lower, uncapped_set, lower_method = uncapped_minimizer(host)
    rng = random.Random(derive_seed(seed, 0xC4EE))

    pool: dict[tuple[int, ...], tuple[int, int]] = {}
    best = [None, None]  # boundary, size

    def record(members: tuple[int, ...], b: int, s: int) -> None:
        if s == 0 or s > cap:
            return
        if best[0] is None or _better(b, s, best[0], best[1]):
            best[0], best[1] = b, s
            thr = (b / s) * (1 + tolerance)
            for key in [k for k, (bb, ss) in pool.items() if bb / ss > thr]:
                del pool[key]
        if b / s <= (best[0] / best[1]) * (1 + tolerance) and len(pool) < max_optimizers:
            pool.setdefault(members, (b, s))

    seeds = []
    for name, order in _seed_orders(host, rng, uncapped_set):
        b, s, k = _prefix_best(host, order, cap)
        members = tuple(sorted(order[:k]))
        seeds.append((b, s, members))
        record(members, b, s)
    seeds.sort(key=lambda t: (t[0] / t[1], t[2]))
    starts = []
    for b, s, m in seeds:
        if m not in starts:
            starts.append(m)
        if len(starts) >= restarts:
            break

    tabu_steps = budget // TABU_SHARE if budget > 0 else 0
    per = (budget - tabu_steps) // max(1, len(starts)) if budget > 0 else 0
    for r, start in enumerate(starts):
        if per == 0:
            break
        local = random.Random(derive_seed(seed, 0x5A, r))
        st = _State(host, start)
        t0 = 2.0
        for it in range(per):
            if not st.frontier:
                break
            v = st.frontier[local.randrange(len(st.frontier))]
            db, ds = st.delta(v)
            ns = st.size + ds
            if ns == 0 or ns > cap:
                continue
            lam = best[0] / best[1]
            dE = db - lam * ds
            temp = t0 * (1.0 - it / per) + 1e-3
            if dE <= 0 or local.random() < math.exp(-dE / temp):
                st.flip(v)
                nb = st.bnd
                if _better(nb, ns, best[0], best[1]):
                    record(st.members(), nb, ns)
                elif len(pool) < max_optimizers and nb * best[1] <= best[0] * ns * (1 + tolerance):
                    record(st.members(), nb, ns)

    if tabu_steps and pool:
        start = min(pool.items(), key=lambda kv: (Fraction(*kv[1]), kv[0]))[0]
        local = random.Random(derive_seed(seed, 0x7AB0))
        st = _State(host, start)
        until: dict[int, int] = {}
        for it in range(1, tabu_steps + 1):
            pick = None
            for v in st.frontier:
                db, ds = st.delta(v)
                nb, ns = st.bnd + db, st.size + ds
                if ns == 0 or ns > cap:
                    continue
                if until.get(v, 0) > it and not _better(nb, ns, best[0], best[1]):
                    continue
                if pick is None or _better(nb, ns, pick[0], pick[1]) or (nb * pick[1] == pick[0] * ns and v < pick[2]):
                    pick = (nb, ns, v)
            if pick is None:
                break
            nb, ns, v = pick
            st.flip(v)
            until[v] = it + TABU_TENURE + local.randrange(TABU_TENURE)
            if _better(nb, ns, best[0], best[1]) or (
                    len(pool) < max_optimizers and nb * best[1] <= best[0] * ns * (1 + tolerance)):
                record(st.members(), nb, ns)

    # component repair: the best connected piece never has a worse ratio than the whole
    for members in list(pool):
        for comp in host.components(members):
            comp = tuple(comp)
            record(comp, host.boundary(comp), len(comp))

    phi = Fraction(best[0], best[1])
    thr = float(phi) * (1 + tolerance)
    opts = sorted(m for m, (b, s) in pool.items() if b / s <= thr)
    return CheegerResult(phi, lower, opts, "search", lower_method, V, host.labels)
