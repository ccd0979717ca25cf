"""Restricted isoperimetry in the square [-1, 1]^2 for polygonal regions under a planar norm.

The restricted surface energy of a region only charges boundary that lies in the
open square; boundary on the square's sides is free. The variational value for
area budget 2 + alpha is the least energy-to-area ratio over regions of area at
most 2 + alpha.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from perciso import geometry
from perciso._rng import derive_seed
from perciso.boundary_norm import NormTable
from perciso.rightmost import PlanarCurve

SQUARE = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_EPS = 1e-12


# -- norms -------------------------------------------------------------------


class Norm:
    name = "norm"
    square_symmetric = True

    def __call__(self, u, w=None):
        if w is None:
            u, w = u[0], u[1]
        out = self._eval(np.asarray(u, dtype=np.float64), np.asarray(w, dtype=np.float64))
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name


class EuclideanNorm(Norm):
    name = "euclidean"

    def _eval(self, u, w):
        return np.hypot(u, w)


class L1Norm(Norm):
    name = "l1"

    def _eval(self, u, w):
        return np.abs(u) + np.abs(w)


class LinfNorm(Norm):
    name = "linf"

    def _eval(self, u, w):
        return np.maximum(np.abs(u), np.abs(w))


class ScaledNorm(Norm):
    def __init__(self, base: Norm, factor: float) -> None:
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        self.base = base
        self.factor = float(factor)
        self.name = f"{base.name}*{factor:g}"
        self.square_symmetric = base.square_symmetric

    def _eval(self, u, w):
        return self.factor * self.base._eval(u, w)


class TableNorm(Norm):
    """Norm read off a symmetrized :class:`NormTable`."""

    def __init__(self, table: NormTable, name: str = "table") -> None:
        self.table = table
        self.name = name

    def _eval(self, u, w):
        return np.asarray(self.table(u, w))


BUILTIN_NORMS = {"euclidean": EuclideanNorm, "l1": L1Norm, "linf": LinfNorm}


def load_norm(spec: str) -> Norm:
    """Builtin name (``euclidean``, ``l1``, ``linf``) or a saved norm-table path."""
    if spec in BUILTIN_NORMS:
        return BUILTIN_NORMS[spec]()
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"no builtin norm or norm-table file named {spec!r}")
    return TableNorm(NormTable.load(path), name=path.name)


# -- polygons ----------------------------------------------------------------


@dataclass
class Polygon:
    """Simple polygon; stored counter-clockwise."""

    vertices: np.ndarray
    in_square: bool = True

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("a polygon needs at least three vertices")
        a = geometry.signed_area(v)
        if abs(a) <= _EPS:
            raise ValueError("degenerate polygon (zero area)")
        if a < 0:
            v = v[::-1].copy()
        if not geometry.is_simple(v, True):
            raise ValueError("polygon is not simple")
        if self.in_square and np.any(np.abs(v) > 1.0 + 1e-9):
            raise ValueError("polygon leaves the square [-1, 1]^2")
        self.vertices = v

    def __len__(self) -> int:
        return len(self.vertices)

    def to_dict(self) -> dict:
        return {"vertices": [[_sig12(x), _sig12(y)] for x, y in self.vertices]}

    @classmethod
    def from_dict(cls, data: dict, in_square: bool = True) -> "Polygon":
        return cls(np.array(data["vertices"], dtype=np.float64), in_square)


def _sig12(x: float) -> float:
    return float(f"{x:.12g}")


def area(poly: Polygon) -> float:
    return abs(geometry.signed_area(poly.vertices))


def _on_same_side(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Segment endpoints both on one side of the square, i.e. the segment lies on its boundary."""
    same = np.zeros(len(a), dtype=bool)
    for k in (0, 1):
        for s in (-1.0, 1.0):
            same |= (np.abs(a[:, k] - s) <= tol) & (np.abs(b[:, k] - s) <= tol)
    return same


def _energy_pts(pts: np.ndarray, norm: Norm, restricted: bool = True) -> float:
    nxt = np.roll(pts, -1, axis=0)
    t = nxt - pts
    vals = np.asarray(norm(t[:, 1], -t[:, 0]), dtype=np.float64)  # outward normal of a CCW polygon
    if restricted:
        vals = np.where(_on_same_side(pts, nxt), 0.0, vals)
    return math.fsum(vals)  # order-free, so a region and its complement agree exactly


def surface_energy(poly: Polygon, norm: Norm) -> float:
    """Norm of the outward normal integrated over the boundary inside the open square."""
    return _energy_pts(poly.vertices, norm, True)


def surface_energy_edge_form(poly: Polygon, norm: Norm) -> float:
    """Same quantity via the edge vectors; agrees with the normal form for square-symmetric norms."""
    pts = poly.vertices
    nxt = np.roll(pts, -1, axis=0)
    t = nxt - pts
    vals = np.asarray(norm(t[:, 0], t[:, 1]), dtype=np.float64)
    return math.fsum(np.where(_on_same_side(pts, nxt), 0.0, vals))


def norm_perimeter(poly: Polygon, norm: Norm) -> float:
    return _energy_pts(poly.vertices, norm, False)


def conductance(poly: Polygon, norm: Norm) -> float:
    return surface_energy(poly, norm) / area(poly)


# -- Wulff constructions -----------------------------------------------------------


def wulff_shape(norm: Norm, directions: int = 360) -> Polygon:
    if directions < 8:
        raise ValueError("at least 8 directions are required")
    th = 2 * np.pi * np.arange(directions) / directions
    nx_, ny_ = np.cos(th), np.sin(th)
    tau = np.asarray(norm(nx_, ny_))
    # the shape lies in the disc of radius max tau; the grid polygon overshoots it by < 1/cos(pi/8)
    pts = 2.0 * float(tau.max()) * SQUARE
    for a, b, c in zip(nx_, ny_, tau):
        pts = geometry.clip_halfplane(pts, (a, b), c)
    return Polygon(pts, in_square=False)


def _corner_transforms():
    # maps from the first quadrant to each corner of the square: (sign x, sign y)
    return [(1, 1), (-1, 1), (-1, -1), (1, -1)]


def quarter_wulff_conductance(norm: Norm, alpha: float, directions: int = 360) -> tuple[float, Polygon, bool]:
    """Corner-anchored quarter Wulff shape dilated to area min(2 + alpha, largest that fits)."""
    W = wulff_shape(norm, directions).vertices
    Q = geometry.clip_halfplane(geometry.clip_halfplane(W, (-1.0, 0.0), 0.0), (0.0, -1.0), 0.0)
    a0 = abs(geometry.signed_area(Q))
    target = 2.0 + alpha
    ext = Q.max(axis=0)
    t = math.sqrt(target / a0)
    clamped = False
    if t * ext.max() > 2.0:
        t = 2.0 / ext.max()
        clamped = True
    best = None
    for sx, sy in _corner_transforms():
        pts = t * Q * np.array([sx, sy]) + np.array([-sx, -sy])
        pts = np.clip(pts, -1.0, 1.0)
        poly = Polygon(pts)
        val = conductance(poly, norm)
        if best is None or val < best[0] - 1e-15:
            best = (val, poly)
    return best[0], best[1], clamped


def half_wulff_conductance(norm: Norm, alpha: float, directions: int = 360) -> tuple[float, Polygon, bool]:
    """Half Wulff shape standing on a side of the square, dilated to the area budget or clamped to fit."""
    W = wulff_shape(norm, directions).vertices
    H = geometry.clip_halfplane(W, (0.0, -1.0), 0.0)
    a0 = abs(geometry.signed_area(H))
    target = 2.0 + alpha
    width = H[:, 0].max() - H[:, 0].min()
    height = H[:, 1].max()
    t = math.sqrt(target / a0)
    clamped = False
    limit = min(2.0 / width, 2.0 / height)
    if t > limit:
        t = limit
        clamped = True
    centre = 0.5 * (H[:, 0].max() + H[:, 0].min())
    base = t * (H - np.array([centre, 0.0]))
    best = None
    for k in range(4):
        c, s = math.cos(k * math.pi / 2), math.sin(k * math.pi / 2)
        rot = np.array([[c, -s], [s, c]])
        pts = (base + np.array([0.0, -1.0])) @ rot.T
        pts = np.clip(np.round(pts, 15), -1.0, 1.0)
        poly = Polygon(pts)
        val = conductance(poly, norm)
        if best is None or val < best[0] - 1e-15:
            best = (val, poly)
    return best[0], best[1], clamped


def _cut_offset(theta: float, target: float) -> float:
    """Offset c with Leb({x : <x, n> <= c} within the square) = target, n = (cos, sin) of theta.

    <x, n> for x uniform on the square is a sum of two uniforms, whose CDF is
    piecewise quadratic; it is inverted in closed form.
    """
    a, b = abs(math.cos(theta)), abs(math.sin(theta))
    if a < b:
        a, b = b, a
    f = min(max(target / 4.0, 0.0), 1.0)
    if b < 1e-15:
        return a * (2.0 * f - 1.0)
    low = b / (2.0 * a)  # CDF value where the flat part begins
    if f <= low:
        return math.sqrt(8.0 * a * b * f) - (a + b)
    if f >= 1.0 - low:
        return (a + b) - math.sqrt(8.0 * a * b * (1.0 - f))
    return 2.0 * a * f - a


def _halfplane_cut(theta: float, target: float) -> np.ndarray:
    n = (math.cos(theta), math.sin(theta))
    return geometry.clip_halfplane(SQUARE, n, _cut_offset(theta, target))


def straight_cut_conductance(norm: Norm, alpha: float, angles: int = 360) -> tuple[float, Polygon, float]:
    """Best half-plane region of area 2 + alpha over cut directions; returns (value, polygon, angle)."""
    target = 2.0 + alpha

    def value(theta: float) -> float:
        pts = _halfplane_cut(theta, target)
        return _energy_pts(pts, norm) / abs(geometry.signed_area(pts))

    grid = 2 * np.pi * np.arange(angles) / angles
    vals = np.array([value(t) for t in grid])
    i = int(np.argmin(vals))
    best_t, best_v = float(grid[i]), float(vals[i])
    step = 2 * np.pi / angles
    res = minimize_scalar(value, bounds=(best_t - step, best_t + step), method="bounded", options={"xatol": 1e-10})
    if res.fun < best_v:
        best_t, best_v = float(res.x), float(res.fun)
    poly = Polygon(_halfplane_cut(best_t, target))
    return conductance(poly, norm), poly, best_t


# -- free-form candidate regions --------------------------------------------------------


_CORNER_SNAP = 1e-9


def _snap(s: float) -> float:
    """Perimeter coordinate in [0, 8), moved onto a corner when within _CORNER_SNAP of one.

    Both perimeter_point and _arc_corners go through this, so an endpoint at a
    corner and the corner itself are never both emitted as polygon vertices.
    """
    s = s % 8.0
    c = 2.0 * round(s / 2.0)
    return (c % 8.0) if abs(s - c) <= _CORNER_SNAP else s


def perimeter_point(s: float) -> np.ndarray:
    """Point of the square's boundary at counter-clockwise arclength s from (-1, -1)."""
    s = _snap(s)
    side, r = int(s // 2), s % 2.0
    start = SQUARE[side]
    end = SQUARE[(side + 1) % 4]
    return start + (r / 2.0) * (end - start)


def perimeter_coord(p) -> float:
    x, y = float(p[0]), float(p[1])
    if abs(y + 1) <= 1e-9 and x < 1 - 1e-12:
        return x + 1.0
    if abs(x - 1) <= 1e-9 and y < 1 - 1e-12:
        return 2.0 + y + 1.0
    if abs(y - 1) <= 1e-9 and x > -1 + 1e-12:
        return 4.0 + 1.0 - x
    if abs(x + 1) <= 1e-9:
        return 6.0 + 1.0 - y
    raise ValueError(f"point {p} is not on the square's boundary")


def _arc_corners(s_from: float, s_to: float) -> list[np.ndarray]:
    """Square corners passed going counter-clockwise from s_from to s_to (exclusive)."""
    s_from, s_to = _snap(s_from), _snap(s_to)
    span = (s_to - s_from) % 8.0
    out = []
    for k in range(4):
        c = 2.0 * k
        d = (c - s_from) % 8.0
        if 0.0 < d < span:
            out.append((d, SQUARE[k]))
    out.sort(key=lambda t: t[0])
    return [c for _, c in out]


@dataclass
class CandidateRegion:
    """Region cut from the square by one interior curve whose endpoints lie on the square's boundary.

    ``side`` 0 takes the part reached by walking the boundary counter-clockwise
    from the curve's end back to its start; side 1 is the complement.
    """

    s0: float
    s1: float
    controls: np.ndarray
    side: int = 0

    def curve(self) -> np.ndarray:
        return np.vstack([perimeter_point(self.s0), np.asarray(self.controls).reshape(-1, 2), perimeter_point(self.s1)])

    def polygon_points(self) -> np.ndarray:
        c = self.curve()
        if self.side == 0:
            arc = _arc_corners(self.s1, self.s0)
            return np.vstack([c] + arc) if arc else c
        arc = _arc_corners(self.s0, self.s1)
        return np.vstack([c[::-1]] + arc) if arc else c[::-1]

    def complement(self) -> "CandidateRegion":
        return CandidateRegion(self.s0, self.s1, np.array(self.controls, copy=True), 1 - self.side)

    def is_valid(self) -> bool:
        ctrl = np.asarray(self.controls).reshape(-1, 2)
        if np.any(np.abs(ctrl) >= 1.0 - 1e-9):
            return False
        pts = self.polygon_points()
        if len(pts) < 3 or geometry.signed_area(pts) <= _EPS:
            return False
        return geometry.is_simple(pts, True)

    def polygon(self) -> Polygon:
        return Polygon(self.polygon_points())


def _side_of(s: float) -> int:
    return int((s % 8.0) // 2)


def _project_area(region: CandidateRegion, target: float) -> CandidateRegion | None:
    """Move the region to area ``target`` keeping the shape of the interior curve, or None."""
    pts = region.polygon_points()
    a0 = geometry.signed_area(pts)
    if a0 <= _EPS:
        return None
    c = region.curve()
    k0, k1 = _side_of(region.s0), _side_of(region.s1)
    if k0 == k1 or (k0 - k1) % 4 in (1, 3):
        if k0 == k1:
            anchor = 0.5 * (c[0] + c[-1])
            # the bump between curve and side is region side 0 iff the arc s1 -> s0 stays on that side
            bump_is_region = ((region.s0 - region.s1) % 8.0) < 2.0 and not _arc_corners(region.s1, region.s0)
            if region.side == 1:
                bump_is_region = not bump_is_region
        else:
            corner_idx = k1 if (k1 - k0) % 4 == 1 else k0
            anchor = SQUARE[corner_idx]
            in_region = any(np.allclose(anchor, q) for q in pts)
            bump_is_region = in_region
        bump_area = a0 if bump_is_region else 4.0 - a0
        want = target if bump_is_region else 4.0 - target
        if bump_area <= _EPS or want <= _EPS:
            return None
        t = math.sqrt(want / bump_area)
        new_c = anchor + t * (c - anchor)
    else:
        # opposite sides: sliding the curve along the sides changes the area linearly
        axis = 0 if k0 in (0, 2) else 1
        shift = np.zeros(2)
        shift[axis] = 1e-3
        probe = CandidateRegion(region.s0, region.s1, region.controls, region.side)
        moved = c + shift
        try:
            probe = _from_curve(moved, region.side)
        except ValueError:
            return None
        slope = (geometry.signed_area(probe.polygon_points()) - a0) / 1e-3
        if abs(slope) < 1e-9:
            return None
        d = (target - a0) / slope
        shift[axis] = d
        new_c = c + shift
    try:
        out = _from_curve(new_c, region.side)
    except ValueError:
        return None
    if not out.is_valid():
        return None
    if abs(geometry.signed_area(out.polygon_points()) - target) > 1e-9:
        return None
    return out


def _from_curve(curve: np.ndarray, side: int) -> CandidateRegion:
    if np.any(np.abs(curve[[0, -1]]) > 1.0 + 1e-12):
        raise ValueError("endpoint left the square")
    ends = np.clip(curve[[0, -1]], -1.0, 1.0)
    return CandidateRegion(perimeter_coord(ends[0]), perimeter_coord(ends[1]), curve[1:-1].copy(), side)


def _resample(curve: np.ndarray, k: int) -> np.ndarray:
    """k interior points evenly spaced by arclength along an open polyline."""
    seg = np.linalg.norm(np.diff(curve, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    ts = np.linspace(0.0, cum[-1], k + 2)[1:-1]
    return np.column_stack([np.interp(ts, cum, curve[:, 0]), np.interp(ts, cum, curve[:, 1])])


def region_from_polygon(poly: Polygon, controls: int) -> CandidateRegion | None:
    """Candidate region whose interior curve follows the polygon's boundary inside the open square."""
    v = poly.vertices
    m = len(v)
    on_bdry = np.array([np.any(np.abs(np.abs(p) - 1.0) <= 1e-9) for p in v])
    # first run of vertices leaving the boundary and returning to it
    for start in range(m):
        if not on_bdry[start]:
            continue
        nxt = (start + 1) % m
        seg_on_side = _on_same_side(v[[start]], v[[nxt]])[0]
        if seg_on_side:
            continue
        run = [v[start]]
        j = nxt
        while True:
            run.append(v[j])
            if on_bdry[j]:
                break
            j = (j + 1) % m
            if j == start:
                return None
        curve = np.array(run)
        inner = np.clip(_resample(curve, controls), -1 + 1e-6, 1 - 1e-6)
        region = CandidateRegion(perimeter_coord(curve[0]), perimeter_coord(curve[-1]), inner, 0)
        if not region.is_valid():
            region = region.complement()
            if not region.is_valid():
                return None
        # pick the side whose area matches the polygon
        a = geometry.signed_area(region.polygon_points())
        if abs(a - area(poly)) > abs(4.0 - a - area(poly)):
            region = region.complement()
        return region
    return None


@dataclass
class VariationalResult:
    alpha: float
    phi_hat: float
    optimizer: Polygon
    optimizer_family: str
    families: dict[str, float]
    clamped: dict[str, bool] = field(default_factory=dict)
    family_polygons: dict[str, Polygon] = field(default_factory=dict, repr=False)
    trace: list[tuple[int, float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "phi_hat": _sig12(self.phi_hat),
            "optimizer_family": self.optimizer_family,
            "optimizer": self.optimizer.to_dict(),
            "families": {k: _sig12(v) for k, v in self.families.items()},
            "clamped": self.clamped,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _objective(region: CandidateRegion, norm: Norm) -> float:
    pts = region.polygon_points()
    return _energy_pts(pts, norm) / geometry.signed_area(pts)


def _anneal(start: CandidateRegion, norm: Norm, target: float, iterations: int, rng: np.random.Generator) -> tuple[CandidateRegion, float]:
    cur = _project_area(start, target)
    if cur is None:
        return start, math.inf
    cur_v = _objective(cur, norm)
    best, best_v = cur, cur_v
    k = len(np.asarray(cur.controls).reshape(-1, 2))
    t0 = 0.05 * cur_v
    for it in range(iterations):
        frac = it / max(1, iterations)
        temp = t0 * (1.0 - frac) + 1e-9
        scale = 0.25 * (1.0 - frac) + 0.005
        ctrl = np.array(cur.controls, dtype=np.float64).reshape(-1, 2)
        s0, s1 = cur.s0, cur.s1
        move = rng.integers(0, k + 2)
        if move < k:
            ctrl[move] += rng.normal(scale=scale, size=2)
        elif move == k:
            s0 = (s0 + rng.normal(scale=scale)) % 8.0
        else:
            s1 = (s1 + rng.normal(scale=scale)) % 8.0
        prop = _project_area(CandidateRegion(s0, s1, ctrl, cur.side), target)
        if prop is None:
            continue
        v = _objective(prop, norm)
        if v <= cur_v or rng.random() < math.exp(-(v - cur_v) / temp):
            cur, cur_v = prop, v
            if v < best_v:
                best, best_v = prop, v
    return _refine(best, best_v, norm, target)


def _refine(region: CandidateRegion, value: float, norm: Norm, target: float, max_evals: int = 800) -> tuple[CandidateRegion, float]:
    """Coordinate pattern search with halving steps."""
    step = 0.05
    evals = 0
    k = len(np.asarray(region.controls).reshape(-1, 2))
    coords = [(i, j) for i in range(k) for j in (0, 1)] + [("s0", 0), ("s1", 0)]
    while step > 1e-6 and evals < max_evals:
        improved = False
        for which, j in coords:
            for sign in (1.0, -1.0):
                evals += 1
                ctrl = np.array(region.controls, dtype=np.float64).reshape(-1, 2)
                s0, s1 = region.s0, region.s1
                if which == "s0":
                    s0 = (s0 + sign * step) % 8.0
                elif which == "s1":
                    s1 = (s1 + sign * step) % 8.0
                else:
                    ctrl[which, j] += sign * step
                prop = _project_area(CandidateRegion(s0, s1, ctrl, region.side), target)
                if prop is None:
                    continue
                v = _objective(prop, norm)
                if v < value * (1.0 - 1e-12):
                    region, value, improved = prop, v, True
                    break
        if not improved:
            step *= 0.5
    return region, value


def _straight_region(theta: float, target: float, controls: int) -> CandidateRegion | None:
    pts = _halfplane_cut(theta, target)
    return region_from_polygon(Polygon(pts), controls)


def solve_restricted(
    norm: Norm,
    alpha: float,
    control_points: int = 6,
    restarts: int = 4,
    seed: int = 0,
    iterations: int = 600,
    extra_candidates: list[Polygon] | None = None,
) -> VariationalResult:
    """Numerical value of the restricted problem with area budget 2 + alpha.

    The reported value is the minimum over the structured families, the
    annealed free-form curves and any ``extra_candidates`` of area at most
    2 + alpha, re-evaluated on the returned optimizer.
    """
    if not (-1.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (-1, 1]")
    if control_points < 1:
        raise ValueError("at least one control point is required")
    target = 2.0 + alpha
    families: dict[str, float] = {}
    polys: dict[str, Polygon] = {}
    clamped: dict[str, bool] = {}

    sv, sp, theta = straight_cut_conductance(norm, alpha)
    families["straight"], polys["straight"] = sv, sp
    qv, qp, qc = quarter_wulff_conductance(norm, alpha)
    families["quarter_wulff"], polys["quarter_wulff"], clamped["quarter_wulff"] = qv, qp, qc
    hv, hp, hc = half_wulff_conductance(norm, alpha)
    families["half_wulff"], polys["half_wulff"], clamped["half_wulff"] = hv, hp, hc

    starts: list[CandidateRegion] = []
    for fam in ("straight", "quarter_wulff", "half_wulff"):
        reg = region_from_polygon(polys[fam], control_points)
        if reg is not None:
            starts.append(reg)
    rng0 = np.random.default_rng(derive_seed(seed, 0x5017))
    for _ in range(restarts):
        s0 = float(rng0.uniform(0, 8))
        s1 = float((s0 + rng0.uniform(1.5, 6.5)) % 8)
        a, b = perimeter_point(s0), perimeter_point(s1)
        ts = np.linspace(0, 1, control_points + 2)[1:-1, None]
        ctrl = a + ts * (b - a) + rng0.normal(scale=0.1, size=(control_points, 2))
        starts.append(CandidateRegion(s0, s1, np.clip(ctrl, -0.95, 0.95), int(rng0.integers(0, 2))))

    trace = []
    free_best, free_poly = math.inf, None
    for r, st in enumerate(starts):
        rng = np.random.default_rng(derive_seed(seed, 0xF4EE, r))
        reg, val = _anneal(st, norm, target, iterations, rng)
        trace.append((r, val))
        if val < free_best:
            free_best, free_poly = val, reg.polygon()
    if free_poly is not None:
        free_best = conductance(free_poly, norm)
        families["free_form"], polys["free_form"] = free_best, free_poly

    for i, poly in enumerate(extra_candidates or []):
        if area(poly) <= target + 1e-9:
            v = conductance(poly, norm)
            key = "inherited"
            if key not in families or v < families[key]:
                families[key], polys[key] = v, poly

    fam = min(families, key=lambda k: (families[k], k))
    opt = polys[fam]
    return VariationalResult(alpha, conductance(opt, norm), opt, fam, families, clamped, polys, trace)


def solve_monotone(norm: Norm, alphas, **kwargs) -> dict[float, VariationalResult]:
    """Solve for increasing alphas, passing each optimizer on so the values are non-increasing."""
    out: dict[float, VariationalResult] = {}
    carried: list[Polygon] = []
    for a in sorted(alphas):
        res = solve_restricted(norm, a, extra_candidates=list(carried), **kwargs)
        out[a] = res
        carried.append(res.optimizer)
    return out


def duality_residual(norm: Norm, alpha: float, **kwargs) -> tuple[float, float, float]:
    """(residual, value at 2 + alpha, value at 2 - alpha) for the complement duality."""
    plus = solve_restricted(norm, alpha, **kwargs).phi_hat
    minus = solve_restricted(norm, -alpha, **kwargs).phi_hat
    return abs((2 + alpha) / (2 - alpha) * plus - minus), plus, minus


# -- approximation and distances -----------------------------------------------------


def _douglas_peucker(pts: np.ndarray, tol: float) -> np.ndarray:
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        d = geometry.point_segment_distance_linf(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > tol:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return pts[keep]


def _curve_samples(pts: np.ndarray, closed: bool, spacing: float) -> np.ndarray:
    segs = geometry._segments(pts, closed)
    out = [pts]
    for a, b in segs:
        L = float(np.max(np.abs(b - a)))
        k = int(math.ceil(L / spacing))
        if k > 1:
            t = np.linspace(0, 1, k + 1)[1:-1, None]
            out.append(a + t * (b - a))
    return np.vstack(out)


def polygonal_approximation(curve: PlanarCurve, norm: Norm, epsilon: float) -> PlanarCurve:
    """Simplified simple polyline within l-infinity Hausdorff distance epsilon of ``curve``.

    Keeps a subsequence of the input vertices, so the norm length can only drop.
    For closed curves the enclosed area changes by at most epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pts = np.asarray(curve.points, dtype=np.float64)
    if len(pts) <= 3:
        return PlanarCurve(pts.copy(), curve.closed)
    tol = epsilon / 2.0
    while True:
        if curve.closed:
            far = int(np.argmax(np.max(np.abs(pts - pts[0]), axis=1)))
            ring = np.vstack([pts, pts[:1]])
            first = _douglas_peucker(ring[: far + 1], tol)
            second = _douglas_peucker(ring[far:], tol)
            out = np.vstack([first, second[1:-1]])
        else:
            out = _douglas_peucker(pts, tol)
        ok = len(out) >= (3 if curve.closed else 2) and geometry.is_simple(out, curve.closed)
        if ok and curve.closed:
            ok = abs(abs(geometry.signed_area(out)) - abs(geometry.signed_area(pts))) <= epsilon
        if ok:
            res = 0.25 * epsilon
            ok = hausdorff_distance(_curve_samples(pts, curve.closed, res), _curve_samples(out, curve.closed, res), res) <= epsilon
        if ok:
            return PlanarCurve(out, curve.closed)
        if tol < 1e-12:
            return PlanarCurve(pts.copy(), curve.closed)
        tol /= 2.0


def _polygon_samples(poly: Polygon, resolution: float) -> np.ndarray:
    v = poly.vertices
    bdry = _curve_samples(v, True, resolution)
    lo, hi = v.min(axis=0), v.max(axis=0)
    xs = np.arange(lo[0], hi[0] + resolution, resolution)
    ys = np.arange(lo[1], hi[1] + resolution, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    inside = (geometry.winding_numbers(grid, v) % 2) == 1
    return np.vstack([bdry, grid[inside]])


def _as_points(obj, resolution: float) -> np.ndarray:
    if isinstance(obj, Polygon):
        return _polygon_samples(obj, resolution)
    if isinstance(obj, PlanarCurve):
        return _curve_samples(obj.points, obj.closed, resolution)
    pts = np.asarray(obj, dtype=np.float64).reshape(-1, 2)
    return pts


def hausdorff_distance(A, B, resolution: float = 0.01) -> float:
    """Symmetric l-infinity Hausdorff distance; polygons are sampled on boundary plus interior grid."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    pa, pb = _as_points(A, resolution), _as_points(B, resolution)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("Hausdorff distance needs nonempty inputs")
    da, _ = cKDTree(pb).query(pa, p=np.inf)
    db, _ = cKDTree(pa).query(pb, p=np.inf)
    return float(max(da.max(), db.max()))
