"""Right-most lattice paths, their interfaces in the medial graph, and circuit decompositions.

Directions are indexed counter-clockwise from east: E=0, N=1, W=2, S=3. An
oriented edge (a "dart") is a pair ``(tail, head)`` of neighbouring vertices.
A path whose last vertex equals its first (and has at least one step) is a
circuit and is treated cyclically: its closing vertex also contributes to the
right boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from perciso import geometry
from perciso.lattice import (
    DIRS,
    Config,
    Edge,
    Subgraph,
    Vertex,
    canonical_edge,
    edge_boundary,
    infinite_cluster_mask,
    inner_mask,
    _components_of,
)

Dart = tuple[Vertex, Vertex]

REFLECT = "R"
CUT = "C"
DIR_LETTERS = "ENWS"


def direction(a: Vertex, b: Vertex) -> int:
    d = (b[0] - a[0], b[1] - a[1])
    try:
        return DIRS.index(d)
    except ValueError:
        raise ValueError(f"{a} and {b} are not nearest neighbours") from None


def step(v: Vertex, d: int) -> Vertex:
    dx, dy = DIRS[d % 4]
    return (v[0] + dx, v[1] + dy)


@dataclass(frozen=True)
class LatticePath:
    """Nearest-neighbour path given by its vertex sequence x_0, ..., x_m."""

    vertices: tuple[Vertex, ...]

    def __post_init__(self) -> None:
        vs = tuple((int(x), int(y)) for x, y in self.vertices)
        if not vs:
            raise ValueError("a path needs at least one vertex")
        for a, b in zip(vs, vs[1:]):
            direction(a, b)
        object.__setattr__(self, "vertices", vs)

    @classmethod
    def from_steps(cls, start: Vertex, dirs: Iterable[int]) -> "LatticePath":
        vs = [tuple(start)]
        for d in dirs:
            vs.append(step(vs[-1], d))
        return cls(tuple(vs))

    def __len__(self) -> int:
        return len(self.vertices) - 1

    @property
    def is_circuit(self) -> bool:
        return len(self) >= 1 and self.vertices[0] == self.vertices[-1]

    @property
    def darts(self) -> list[Dart]:
        return list(zip(self.vertices, self.vertices[1:]))

    @property
    def directions(self) -> list[int]:
        return [direction(a, b) for a, b in self.darts]

    def is_simple(self) -> bool:
        d = self.darts
        return len(set(d)) == len(d)

    def reversed(self) -> "LatticePath":
        return LatticePath(self.vertices[::-1])


def right_boundary_at(prev: Vertex | None, v: Vertex, nxt: Vertex | None) -> list[Dart]:
    """Darts leaving ``v`` strictly between <v, prev> and <v, nxt>, counter-clockwise.

    At a U-turn (prev == nxt) this is the three other darts.
    """
    if prev is None or nxt is None:
        for w in (prev, nxt):
            if w is not None:
                direction(v, w)
        return []
    d_back = direction(v, prev)
    d_out = direction(v, nxt)
    count = (d_out - d_back - 1) % 4
    return [(v, step(v, d_back + k)) for k in range(1, count + 1)]


def _sweep_positions(path: LatticePath) -> Iterator[tuple[int, Vertex, Vertex, Vertex]]:
    vs = path.vertices
    m = len(path)
    if path.is_circuit:
        for i in range(m):
            yield i, vs[i - 1] if i > 0 else vs[m - 1], vs[i], vs[i + 1]
    else:
        for i in range(1, m):
            yield i, vs[i - 1], vs[i], vs[i + 1]


@dataclass(frozen=True)
class RightBoundary:
    darts: frozenset
    per_vertex: tuple[tuple[Dart, ...], ...]  # indexed like path.vertices

    def unoriented(self) -> set[Edge]:
        return {canonical_edge(a, b) for a, b in self.darts}


def right_boundary(path: LatticePath) -> RightBoundary:
    per = [()] * len(path.vertices)
    for i, prev, v, nxt in _sweep_positions(path):
        per[i] = tuple(right_boundary_at(prev, v, nxt))
    darts = frozenset(d for contrib in per for d in contrib)
    return RightBoundary(darts, tuple(per))


def is_rightmost(path: LatticePath) -> bool:
    if not path.is_simple():
        return False
    rb = right_boundary(path).darts
    return not any(d in rb for d in path.darts)


def enumerate_rightmost(start: Vertex, max_len: int, min_len: int = 1) -> Iterator[LatticePath]:
    """All right-most paths from ``start`` with min_len <= length <= max_len.

    Depth-first over prefixes; every prefix of a right-most path is right-most,
    so pruning on the prefix condition is exact. Circuits get the closing check.
    """
    start = (int(start[0]), int(start[1]))
    verts = [start]
    used: set[Dart] = set()
    rb: set[Dart] = set()

    def rec() -> Iterator[LatticePath]:
        k = len(verts) - 1
        if k >= min_len:
            path = LatticePath(tuple(verts))
            if not path.is_circuit or is_rightmost(path):
                yield path
        if k == max_len:
            return
        v = verts[-1]
        for d in range(4):
            w = step(v, d)
            dart = (v, w)
            if dart in used or dart in rb:
                continue
            sweep = right_boundary_at(verts[-2], v, w) if k >= 1 else []
            if dart in sweep or any(s in used for s in sweep):
                continue
            added = [s for s in sweep if s not in rb]
            used.add(dart)
            rb.update(added)
            verts.append(w)
            yield from rec()
            verts.pop()
            rb.difference_update(added)
            used.discard(dart)

    yield from rec()


# -- interfaces -------------------------------------------------------------


@dataclass(frozen=True)
class Interface:
    """Medial-graph path: a sequence of lattice edges, each reflected or cut through.

    Entries are stored as darts: reflected edges in the orientation of the
    underlying path, cut-through edges pointing away from the vertex they pivot
    around. The stored orientation keeps one-edge paths unambiguous.
    """

    entries: tuple[tuple[Dart, str], ...]
    closed: bool

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def medial_vertices(self) -> list[Edge]:
        return [canonical_edge(*d) for d, _ in self.entries]

    @property
    def flags(self) -> list[str]:
        return [f for _, f in self.entries]

    def cut_darts(self) -> set[Dart]:
        return {d for d, f in self.entries if f == CUT}

    def medial_edges(self) -> list[frozenset]:
        mv = self.medial_vertices
        pairs = list(zip(mv, mv[1:]))
        if self.closed and len(mv) > 1:
            pairs.append((mv[-1], mv[0]))
        return [frozenset(p) for p in pairs]

    def reversed(self) -> "Interface":
        return Interface(self.entries[::-1], self.closed)


def path_to_interface(path: LatticePath) -> Interface:
    if len(path) == 0:
        raise ValueError("a path of length zero has no interface")
    if not is_rightmost(path):
        raise ValueError("path is not right-most")
    vs = path.vertices
    m = len(path)
    out: list[tuple[Dart, str]] = []
    if path.is_circuit:
        for i in range(1, m + 1):
            out.append(((vs[i - 1], vs[i]), REFLECT))
            nxt = vs[i + 1] if i < m else vs[1]
            out.extend((d, CUT) for d in right_boundary_at(vs[i - 1], vs[i], nxt))
    else:
        out.append(((vs[0], vs[1]), REFLECT))
        for i in range(1, m):
            out.extend((d, CUT) for d in right_boundary_at(vs[i - 1], vs[i], vs[i + 1]))
            out.append(((vs[i], vs[i + 1]), REFLECT))
    return Interface(tuple(out), path.is_circuit)


def _faces(e: Edge) -> set[Vertex]:
    """Lower-left corners of the two unit faces bordering edge ``e``."""
    (x0, y0), (x1, y1) = e
    if y0 == y1:
        return {(x0, y0), (x0, y0 - 1)}
    return {(x0, y0), (x0 - 1, y0)}


def geometric_flags(iface: Interface) -> list[str | None]:
    """Reflect/cut flag implied by the neighbouring medial vertices (None at open ends)."""
    mv = iface.medial_vertices
    k = len(mv)
    flags: list[str | None] = []
    for i in range(k):
        if not iface.closed and (i == 0 or i == k - 1):
            flags.append(None)
            continue
        a, b = mv[(i - 1) % k], mv[(i + 1) % k]
        flags.append(REFLECT if _faces(a) & _faces(b) else CUT)
    return flags


def interface_problems(iface: Interface) -> list[str]:
    """Structural checks on an interface; an empty list means it is valid."""
    problems = []
    mv = iface.medial_vertices
    k = len(mv)
    if k == 0:
        return ["empty interface"]
    links = list(zip(mv, mv[1:]))
    if iface.closed:
        links.append((mv[-1], mv[0]))
    for a, b in links:
        shared = set(a) & set(b)
        perpendicular = (a[0][0] == a[1][0]) != (b[0][0] == b[1][0])
        if not (shared and perpendicular):
            problems.append(f"medial vertices {a} and {b} are not adjacent")
    me = iface.medial_edges()
    if len(set(me)) != len(me):
        problems.append("medial edge used twice")
    for got, want in zip(iface.flags, geometric_flags(iface)):
        if want is not None and got != want:
            problems.append("flag disagrees with face adjacency")
            break
    return problems


def reuses_endpoint(iface: Interface) -> bool:
    """Open interface visiting its first or last medial vertex more than once.

    Happens for right-most paths that run along their first or last edge in
    both directions, e.g. (0,0) -> (1,0) -> (0,0) -> (-1,0).
    """
    mv = iface.medial_vertices
    return not iface.closed and len(mv) > 1 and (mv.count(mv[0]) > 1 or mv.count(mv[-1]) > 1)


def interface_to_path(iface: Interface) -> LatticePath:
    darts = [d for d, f in iface.entries if f == REFLECT]
    if not darts:
        if iface.closed:
            # a lone vertex enclosed by its four cut-through edges
            tails = {d[0] for d in iface.cut_darts()}
            if len(tails) == 1:
                return LatticePath((tails.pop(),))
        raise ValueError("interface has no reflected edges")
    for (_, h), (t, _) in zip(darts, darts[1:]):
        if h != t:
            raise ValueError("reflected edges do not form a path")
    path = LatticePath((darts[0][0],) + tuple(h for _, h in darts))
    if path.is_circuit != iface.closed:
        raise ValueError("closedness of interface and path disagree")
    try:
        rebuilt = path_to_interface(path)
    except ValueError as exc:
        raise ValueError(f"invalid interface: {exc}") from None
    if rebuilt != iface:
        raise ValueError("invalid interface: cut-through edges are not the right boundary")
    return path


def single_vertex_interface(v: Vertex) -> Interface:
    return Interface(tuple(((v, step(v, d)), CUT) for d in range(4)), True)


# -- planar curves and hulls -------------------------------------------------


@dataclass(frozen=True)
class PlanarCurve:
    points: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        if self.closed:
            return geometry.closed_length(self.points)
        return geometry.open_length(self.points)

    def signed_area(self) -> float:
        return geometry.signed_area(self.points) if self.closed else 0.0

    def is_simple(self) -> bool:
        return geometry.is_simple(self.points, self.closed)

    def reversed(self) -> "PlanarCurve":
        return PlanarCurve(self.points[::-1].copy(), self.closed)


def corner_point(dart: Dart, flag: str) -> tuple[float, float]:
    (ax, ay), (bx, by) = dart
    dx, dy = bx - ax, by - ay
    if flag == CUT:
        return (ax + 0.25 * dx, ay + 0.25 * dy)
    # a quarter unit off the edge midpoint, toward the right of the dart
    return (0.5 * (ax + bx) + 0.25 * dy, 0.5 * (ay + by) - 0.25 * dx)


def corner_round(iface: Interface) -> PlanarCurve:
    if not iface.closed:
        raise ValueError("corner rounding needs a closed interface")
    pts = np.array([corner_point(d, f) for d, f in iface.entries], dtype=np.float64)
    return PlanarCurve(pts, True)


@dataclass(frozen=True)
class Hull:
    """Points with odd winding number about a closed curve, plus the curve itself."""

    curve: PlanarCurve

    @property
    def polygon(self) -> np.ndarray:
        return self.curve.points

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        odd = (geometry.winding_numbers(pts, self.curve.points) % 2) == 1
        return odd | geometry.on_curve(pts, self.curve.points)

    def lattice_points(self, lo: tuple[int, int], hi: tuple[int, int]) -> set[Vertex]:
        xs = np.arange(lo[0], hi[0] + 1)
        ys = np.arange(lo[1], hi[1] + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        inside = self.contains(pts)
        return {(int(x), int(y)) for x, y in pts[inside]}


def hull(curve: PlanarCurve) -> Hull:
    if not curve.closed:
        raise ValueError("hull needs a closed curve")
    return Hull(curve)


# -- weights ------------------------------------------------------------------


def _weight_of_darts(darts: Iterable[Dart], config: Config, mode: str) -> int:
    if mode not in ("infinite", "within_box"):
        raise ValueError(f"unknown mode {mode!r}")
    edges = set()
    for a, b in darts:
        if not config.is_open(a, b):
            continue
        if mode == "within_box" and not (config.in_inner(a) and config.in_inner(b)):
            continue
        edges.add(canonical_edge(a, b))
    return len(edges)


def path_weight(path: LatticePath, config: Config, mode: str = "infinite") -> int:
    """Number of distinct open edges in the right boundary of ``path``."""
    return _weight_of_darts(right_boundary(path).darts, config, mode)


def interface_weight(iface: Interface, config: Config, mode: str = "infinite") -> int:
    return _weight_of_darts(iface.cut_darts(), config, mode)


# -- circuit decomposition -----------------------------------------------------


@dataclass
class CircuitDecomposition:
    vertices: set[Vertex]
    outer: tuple[LatticePath, Interface]
    inner: list[tuple[LatticePath, Interface]]
    outer_curve: PlanarCurve
    inner_curves: list[PlanarCurve]
    _config: Config = field(repr=False)

    @property
    def dper(self) -> int:
        return len(self.outer[0]) + sum(len(p) for p, _ in self.inner)

    @property
    def vol_area(self) -> float:
        return abs(self.outer_curve.signed_area()) - sum(abs(c.signed_area()) for c in self.inner_curves)

    def weight_sets(self) -> list[set[Edge]]:
        cfg = self._config
        out = []
        for _, iface in [self.outer] + self.inner:
            out.append({canonical_edge(a, b) for a, b in iface.cut_darts() if cfg.is_open(a, b)})
        return out

    def verify(self) -> dict[str, bool]:
        """Re-check the four defining properties; every value should be True."""
        cfg = self._config
        ifaces = [self.outer[1]] + [i for _, i in self.inner]
        curves = [self.outer_curve] + self.inner_curves
        report: dict[str, bool] = {}

        disjoint = all(c.is_simple() for c in curves)
        for i in range(len(ifaces)):
            for j in range(i + 1, len(ifaces)):
                if set(ifaces[i].medial_edges()) & set(ifaces[j].medial_edges()):
                    disjoint = False
                elif geometry.curves_intersect(curves[i].points, True, curves[j].points, True):
                    disjoint = False
        report["disjoint_interfaces"] = disjoint

        sets = self.weight_sets()
        union: set[Edge] = set()
        total = 0
        for s in sets:
            union |= s
            total += len(s)
        U = _subgraph_from(cfg, self.vertices)
        report["weights_partition_boundary"] = total == len(union) and union == edge_boundary(U, "infinite")

        trace = _trace_points(cfg)
        outer_pts = _inside(hull(self.outer_curve), trace)
        inner_pts = [_inside(hull(c), trace) for c in self.inner_curves]
        recovered = outer_pts.difference(*inner_pts) if inner_pts else outer_pts
        report["hull_identity"] = recovered == self.vertices

        rest = trace - self.vertices
        comps = _components_in(cfg, rest)
        ok = True
        for pts in inner_pts:
            pieces = [c for c in comps if c & pts]
            if not pieces or set().union(*pieces) != pts:
                ok = False
        # each finite piece sits in exactly one inner hull or outside the outer hull
        for c in comps:
            homes = sum(1 for pts in inner_pts if c <= pts)
            outside = not (c & outer_pts)
            if homes + outside != 1:
                ok = False
        report["inner_regions"] = ok
        return report


def _subgraph_from(config: Config, vertices: set[Vertex]) -> Subgraph:
    return Subgraph(config, np.array([config.index(v) for v in vertices], dtype=np.int64))


def _trace_points(config: Config) -> set[Vertex]:
    mask = infinite_cluster_mask(config) & inner_mask(config)
    return {(int(x), int(y)) for x, y in config.coords(np.flatnonzero(mask))}


def _inside(h: Hull, points: set[Vertex]) -> set[Vertex]:
    pts = h.polygon
    lo = np.floor(pts.min(axis=0)).astype(int)
    hi = np.ceil(pts.max(axis=0)).astype(int)
    cand = [v for v in points if lo[0] <= v[0] <= hi[0] and lo[1] <= v[1] <= hi[1]]
    if not cand:
        return set()
    keep = h.contains(np.array(cand))
    return {v for v, k in zip(cand, keep) if k}


def _components_in(config: Config, points: set[Vertex]) -> list[set[Vertex]]:
    if not points:
        return []
    mask = np.zeros(config.num_vertices, dtype=bool)
    idx = np.array([config.index(v) for v in points], dtype=np.int64)
    mask[idx] = True
    lab = _components_of(config, mask)
    groups: dict[int, set[Vertex]] = {}
    for i in idx:
        groups.setdefault(int(lab[i]), set()).add(config.vertex(int(i)))
    return list(groups.values())


def _face_orbits(config: Config, verts: set[Vertex]) -> list[list[Vertex]]:
    """Boundary walks of the faces of the open subgraph on ``verts``.

    From dart (a, b) the walk takes the first dart out of b counter-clockwise
    after the reverse direction, i.e. the sharpest right turn available, so the
    traced face lies on the walker's right.
    """
    out_dirs: dict[Vertex, list[int]] = {}
    for v in verts:
        out_dirs[v] = [d for d in range(4) if step(v, d) in verts and config.is_open(v, step(v, d))]
    darts = sorted((v, step(v, d)) for v in verts for d in out_dirs[v])
    seen: set[Dart] = set()
    orbits = []
    for first in darts:
        if first in seen:
            continue
        walk = [first[0]]
        dart = first
        while dart not in seen:
            seen.add(dart)
            a, b = dart
            walk.append(b)
            back = direction(b, a)
            for k in range(1, 5):
                d = (back + k) % 4
                if d in out_dirs[b]:
                    dart = (b, step(b, d))
                    break
        orbits.append(walk)
    return orbits


def circuit_decomposition(U: Subgraph) -> CircuitDecomposition:
    """Outer counter-clockwise circuit and inner clockwise circuits of U.

    Faces of the open subgraph induced on U are traced; the unbounded face gives
    the outer circuit and bounded faces holding infinite-cluster vertices give
    the inner ones.
    """
    config = U.config
    verts = U.vertex_set()
    if not verts:
        raise ValueError("U must be nonempty")
    mask = U.mask
    lab = _components_of(config, mask)
    if len(np.unique(lab[U.vertices])) != 1:
        raise ValueError("U must be connected")
    if len(verts) == 1:
        (v,) = verts
        iface = single_vertex_interface(v)
        return CircuitDecomposition(verts, (LatticePath((v,)), iface), [], corner_round(iface), [], config)

    outer = None
    inner = []
    for walk in _face_orbits(config, verts):
        path = LatticePath(tuple(walk))
        iface = path_to_interface(path)
        curve = corner_round(iface)
        if curve.signed_area() > 0:
            if outer is not None:
                raise RuntimeError("more than one counter-clockwise face walk")
            outer = (path, iface, curve)
        elif interface_weight(iface, config, "infinite") > 0:
            inner.append((path, iface, curve))
    if outer is None:
        raise RuntimeError("no outer face walk found")
    inner.sort(key=lambda t: t[0].vertices)
    return CircuitDecomposition(
        verts,
        (outer[0], outer[1]),
        [(p, i) for p, i, _ in inner],
        outer[2],
        [c for _, _, c in inner],
        config,
    )


def dper_vol(U: Subgraph) -> tuple[int, float, bool]:
    dec = circuit_decomposition(U)
    vol = dec.vol_area
    return dec.dper, vol, dec.dper <= vol ** (2.0 / 3.0)


# Largest curve length a single path step can contribute: a U-turn sweeps three
# cut points, adding 1/(2 sqrt 2) + 1/4 + 1/4 ... bounded by 1 + 1/sqrt(2).
MAX_CURVE_PER_STEP = 1.0 + 1.0 / math.sqrt(2.0)


def isoperimetric_constant() -> float:
    """c with d-per(U) >= c * vol_area(U)^(1/2) for every U with |U| >= 2.

    The outer rounded curve has length at most MAX_CURVE_PER_STEP per step and
    encloses the whole hull-difference region, so the planar isoperimetric
    inequality gives the bound.
    """
    return math.sqrt(4.0 * math.pi) / MAX_CURVE_PER_STEP


# -- text format -------------------------------------------------------------


def path_to_text(path: LatticePath) -> str:
    lines = [f"{a[0]} {a[1]} {DIR_LETTERS[direction(a, b)]}" for a, b in path.darts]
    last = path.vertices[-1]
    lines.append(f"{last[0]} {last[1]} .")
    return "\n".join(lines) + "\n"


def path_from_text(text: str) -> LatticePath:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError("empty path text")
    vs: list[Vertex] = []
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise ValueError(f"line {i + 1}: expected 'x y DIR'")
        v = (int(row[0]), int(row[1]))
        if vs and vs[-1] != v:
            raise ValueError(f"line {i + 1}: vertex does not follow from the previous step")
        if not vs:
            vs.append(v)
        if row[2] == ".":
            if i != len(rows) - 1:
                raise ValueError(f"line {i + 1}: terminator before end of text")
            return LatticePath(tuple(vs))
        if row[2] not in DIR_LETTERS:
            raise ValueError(f"line {i + 1}: unknown direction {row[2]!r}")
        vs.append(step(v, DIR_LETTERS.index(row[2])))
    raise ValueError("path text lacks the final 'x y .' line")


def interface_to_text(iface: Interface) -> str:
    lines = ["closed" if iface.closed else "open"]
    for (a, b), f in iface.entries:
        lines.append(f"{a[0]} {a[1]} {DIR_LETTERS[direction(a, b)]} {f}")
    return "\n".join(lines) + "\n"


def interface_from_text(text: str) -> Interface:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0] not in (["closed"], ["open"]):
        raise ValueError("interface text must start with 'open' or 'closed'")
    entries = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 4 or row[2] not in DIR_LETTERS or row[3] not in (REFLECT, CUT):
            raise ValueError(f"line {i}: expected 'x y DIR R|C'")
        a = (int(row[0]), int(row[1]))
        entries.append(((a, step(a, DIR_LETTERS.index(row[2]))), row[3]))
    return Interface(tuple(entries), rows[0] == ["closed"])
