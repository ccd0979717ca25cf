"""Shared helpers and independent oracles for the test suite."""
from __future__ import annotations

import itertools
import math
import random

import networkx as nx
import pytest

from perciso import lattice

STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))

# filled by the acceptance suite, printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("PERCISO_CACHE_DIR", str(tmp_path / "cache"))


def angle_of(v, w) -> float:
    return math.atan2(w[1] - v[1], w[0] - v[0])


def oracle_right_boundary(vertices) -> set:
    """Right-boundary darts computed from angles, independently of the library's modular sweep."""
    vs = list(vertices)
    m = len(vs) - 1
    if m < 1:
        return set()
    circuit = vs[0] == vs[-1]
    spots = []
    if circuit:
        for i in range(m):
            spots.append((vs[i - 1] if i else vs[m - 1], vs[i], vs[i + 1]))
    else:
        spots = [(vs[i - 1], vs[i], vs[i + 1]) for i in range(1, m)]
    out = set()
    for prev, v, nxt in spots:
        back, fwd = angle_of(v, prev), angle_of(v, nxt)
        span = (fwd - back) % (2 * math.pi) or 2 * math.pi
        for dx, dy in STEPS:
            w = (v[0] + dx, v[1] + dy)
            off = (angle_of(v, w) - back) % (2 * math.pi)
            if 1e-9 < off < span - 1e-9:
                out.add((v, w))
    return out


def oracle_is_rightmost(vertices) -> bool:
    darts = list(zip(vertices, vertices[1:]))
    if len(set(darts)) != len(darts):
        return False
    rb = oracle_right_boundary(vertices)
    return not any(d in rb for d in darts)


def all_walks(start, max_len):
    """Every nearest-neighbour walk from ``start`` with 1..max_len steps."""
    for k in range(1, max_len + 1):
        for dirs in itertools.product(range(4), repeat=k):
            vs = [start]
            for d in dirs:
                x, y = vs[-1]
                vs.append((x + STEPS[d][0], y + STEPS[d][1]))
            yield tuple(vs)


def random_connected_subset(config, size: int, rng: random.Random) -> set:
    """Random connected subset of the giant component grown by open edges."""
    giant = lattice.giant_component(config).vertex_set()
    start = rng.choice(sorted(giant))
    U = {start}
    frontier = [w for w in config.open_neighbors(start) if w in giant]
    while len(U) < size and frontier:
        w = frontier.pop(rng.randrange(len(frontier)))
        if w in U:
            continue
        U.add(w)
        frontier.extend(x for x in config.open_neighbors(w) if x in giant and x not in U)
    return U


def open_graph(config) -> nx.Graph:
    """Open edges of the padded box as a networkx graph (test-side oracle)."""
    g = nx.Graph()
    N = config.N
    for x in range(-N, N + 1):
        for y in range(-N, N + 1):
            g.add_node((x, y))
            for w in ((x + 1, y), (x, y + 1)):
                if config.in_box(w) and config.is_open((x, y), w):
                    g.add_edge((x, y), w)
    return g


def brute_boundary(config, U: set, mode: str) -> set:
    """Open edges with one endpoint in U, recounted from scratch."""
    g = open_graph(config)
    big = max(nx.connected_components(g), key=len)
    n = config.n
    inner = {v for v in big if abs(v[0]) <= n and abs(v[1]) <= n}
    sub = g.subgraph(inner)
    giant = max(nx.connected_components(sub), key=lambda c: (len(c), -min(c)[0], -min(c)[1]))
    other = giant if mode == "within_box" else big
    out = set()
    for u in U:
        for w in g.neighbors(u):
            if w not in U and w in other:
                out.add(tuple(sorted((u, w))))
    return out


def brute_cheeger(num_vertices: int, edges, cap: int | None = None):
    """Minimum |boundary|/|H| by plain subset enumeration (Fractions)."""
    from fractions import Fraction

    best = None
    cap = num_vertices // 2 if cap is None else cap
    for mask in range(1, 1 << num_vertices):
        size = bin(mask).count("1")
        if size > cap:
            continue
        b = sum(1 for a, c in edges if ((mask >> a) ^ (mask >> c)) & 1)
        val = Fraction(b, size)
        if best is None or val < best:
            best = val
    return best
