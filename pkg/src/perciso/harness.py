"""End-to-end experiments: Cheeger scaling, continuum prediction and optimizer shapes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import boundary_norm, cheeger, continuum, geometry, lattice, rightmost
from ._rng import derive_seed

log = logging.getLogger(__name__)

CSV_SCHEMA = "perciso-scaling"
CSV_VERSION = 1
SCALING_COLUMNS = (
    "p", "n", "seed", "cluster_size", "phi_lower", "phi_upper", "n_phi_lower", "n_phi",
    "upper_method", "theta", "phi_cont", "predicted", "status",
)
SHAPE_COLUMNS = ("n", "seed", "optimizer", "family", "distance", "status")
CACHE_ENV = "PERCISO_CACHE_DIR"


class CacheError(RuntimeError):
    """Cached data needed by a stage is missing or unusable."""


def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    path = Path(root) if root else Path.home() / ".cache" / "perciso"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# -- norm-table cache ----------------------------------------------------------------


def cached_norm_table(p: float, resolution: int, scales, replicas: int, seed: int,
                      directory: str | Path | None = None) -> Path:
    """Path of a norm table for this key, building it on a miss.

    Files are named by a hash of the key and carry a checksum of their payload;
    an entry whose checksum or key does not match is rebuilt with a warning.
    """
    key = {"p": float(p), "resolution": int(resolution), "scales": [int(s) for s in scales],
           "replicas": int(replicas), "seed": int(seed)}
    root = Path(directory) if directory is not None else cache_dir()
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"normtable-{_digest(key)[:20]}.json"
    if path.exists():
        try:
            doc = json.loads(path.read_text())
            ok = doc.get("key") == key and doc.get("checksum") == _digest(doc.get("table"))
        except (json.JSONDecodeError, AttributeError, UnicodeDecodeError):
            ok = False
        if ok:
            return path
        warnings.warn(f"norm-table cache entry {path.name} failed its checksum; rebuilding", RuntimeWarning)
    table = boundary_norm.build_norm_table(p, resolution, scales, replicas, seed)
    payload = table.to_dict()
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"key": key, "checksum": _digest(payload), "table": payload}, sort_keys=True, indent=1))
    tmp.replace(path)
    return path


def load_cached_table(path: str | Path) -> boundary_norm.NormTable:
    doc = json.loads(Path(path).read_text())
    return boundary_norm.NormTable.from_dict(doc["table"])


# -- experiment description ----------------------------------------------------------


@dataclass
class ExperimentSpec:
    p: float
    ns: tuple[int, ...]
    seeds: tuple[int, ...] = (0,)
    pad: int | None = None  # None pads each box by n
    norm: str = "auto"  # "auto", a builtin name, or a norm-table file
    table_resolution: int = 5
    table_scales: tuple[int, ...] = (8, 16, 32)
    table_replicas: int = 8
    table_seed: int = 0
    theta_radius: int = 64
    theta_replicas: int = 8
    cheeger_budget: int = 20_000
    cheeger_restarts: int = 4
    alpha: float = 0.0
    control_points: int = 6
    solver_restarts: int = 3
    solver_iterations: int = 600
    shape_resolution: float = 0.02
    shape_optimizers: int = 4
    out: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        self.ns = tuple(int(n) for n in self.ns)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.table_scales = tuple(int(s) for s in self.table_scales)
        if not self.ns:
            raise ValueError("the n grid is empty")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])) or self.ns[0] < 1:
            raise ValueError("the n grid must be positive and strictly increasing")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not (0.5 < self.p <= 1.0):
            raise ValueError("p must lie in (1/2, 1]")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.out is not None:
            parent = Path(self.out).resolve().parent
            if not parent.is_dir():
                raise ValueError(f"output directory {parent} does not exist")

    def key(self) -> dict:
        """Everything that determines the numbers (not where they go or how fast)."""
        d = asdict(self)
        for k in ("out", "workers", "shape_resolution", "shape_optimizers"):
            d.pop(k)
        d["ns"], d["seeds"], d["table_scales"] = list(self.ns), list(self.seeds), list(self.table_scales)
        return d


def resolve_norm(spec: ExperimentSpec) -> continuum.Norm:
    """The boundary norm used for the continuum prediction.

    With ``auto`` the p = 1 norm is the l1 norm; other p use a cached estimated table.
    """
    if spec.norm != "auto":
        return continuum.load_norm(spec.norm)
    if spec.p == 1.0:
        return continuum.L1Norm()
    path = cached_norm_table(spec.p, spec.table_resolution, spec.table_scales, spec.table_replicas, spec.table_seed)
    return continuum.TableNorm(load_cached_table(path), name=f"table(p={spec.p})")


def estimate_theta(spec: ExperimentSpec) -> float:
    if spec.p == 1.0:
        return 1.0
    mean, _ = lattice.density_estimate(spec.p, spec.theta_radius, spec.theta_replicas, derive_seed(spec.table_seed, 0x7E7A))
    return mean


# -- scaling -------------------------------------------------------------------------


@dataclass
class ScalingRecord:
    p: float
    n: int
    seed: int
    cluster_size: int = 0
    phi_lower: Fraction | None = None
    phi_upper: Fraction | None = None
    upper_method: str = ""
    theta: float = math.nan
    phi_cont: float = math.nan
    runtime: float = 0.0
    status: str = "ok"
    optimizers: list[list[tuple[int, int]]] = field(default_factory=list, repr=False)
    disconnected: int = 0  # optimizers made of more than one connected piece

    @property
    def n_phi(self) -> Fraction | None:
        return None if self.phi_upper is None else self.n * self.phi_upper

    @property
    def n_phi_lower(self) -> Fraction | None:
        return None if self.phi_lower is None else self.n * self.phi_lower

    @property
    def predicted(self) -> float:
        return self.phi_cont / self.theta if self.theta > 0 else math.nan

    def row(self) -> list[str]:
        def rat(x):
            return "" if x is None else str(x)

        def num(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{float(x):.12g}"

        return [f"{self.p:g}", str(self.n), str(self.seed), str(self.cluster_size), rat(self.phi_lower),
                rat(self.phi_upper), num(self.n_phi_lower), num(self.n_phi), self.upper_method,
                num(self.theta), num(self.phi_cont), num(self.predicted), self.status]


def row_seed(seed: int, n: int) -> int:
    return derive_seed(seed, 0x5CA1E, n)


def _cheeger_row(args) -> ScalingRecord:
    spec, n, seed = args
    rec = ScalingRecord(spec.p, n, seed)
    t0 = time.perf_counter()
    try:
        cfg = lattice.sample_config(n, spec.p, row_seed(seed, n), spec.pad)
        sub = lattice.giant_component(cfg)
        host = cheeger.HostGraph.from_subgraph(sub)
        rec.cluster_size = host.num_vertices
        if host.num_vertices <= cheeger.EXACT_THRESHOLD:
            res = cheeger.cheeger_exact(host)
        else:
            res = cheeger.cheeger_search(host, budget=spec.cheeger_budget, seed=seed, restarts=spec.cheeger_restarts)
        rec.phi_lower, rec.phi_upper, rec.upper_method = res.phi_lower, res.phi_upper, res.upper_method
        rec.optimizers = [[tuple(int(c) for c in lab) for lab in opt] for opt in res.optimizer_labels()]
        rec.disconnected = sum(len(host.components(opt)) > 1 for opt in res.optimizers)
    except Exception as exc:  # a failing row is recorded and the run goes on
        rec.status = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    rec.runtime = time.perf_counter() - t0
    return rec


@dataclass
class ScalingTable:
    spec: ExperimentSpec
    records: list[ScalingRecord]
    theta: float
    phi_cont: float
    continuum: continuum.VariationalResult | None
    runtimes: dict[str, float]

    @property
    def predicted(self) -> float:
        return self.phi_cont / self.theta

    def values(self, n: int) -> list[float]:
        return [float(r.n_phi) for r in self.records if r.n == n and r.n_phi is not None]

    def spread(self, n: int) -> float:
        """Sample standard deviation of n * Phi across seeds."""
        v = self.values(n)
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    def summary(self) -> dict:
        n = self.spec.ns[-1]
        vals = self.values(n)
        mean = float(np.mean(vals)) if vals else math.nan
        return {"n": n, "mean_n_phi": mean, "predicted": self.predicted,
                "ratio": mean / self.predicted if vals else math.nan,
                "spreads": {str(m): self.spread(m) for m in self.spec.ns}}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_SCHEMA} v{CSV_VERSION}; columns: " + ",".join(SCALING_COLUMNS)
                  + "; phi_* are exact fractions, n_phi* decimals, predicted = phi_cont / theta\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCALING_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        s = self.summary()
        buf.write(f"# summary: n={s['n']} mean_n_phi={s['mean_n_phi']:.12g} predicted={s['predicted']:.12g} "
                  f"ratio={s['ratio']:.12g}\n")
        return buf.getvalue()


def _optimizer_cache_path(spec: ExperimentSpec) -> Path:
    return cache_dir() / f"optimizers-{_digest(spec.key())[:20]}.json"


def run_scaling(spec: ExperimentSpec) -> ScalingTable:
    """Cheeger sandwich for every (n, seed), plus theta and the continuum value once.

    The CSV (written to ``spec.out`` when set) depends only on the spec; wall-clock
    times go to a ``.runtimes.json`` sidecar next to it.
    """
    times: dict[str, float] = {}
    t0 = time.perf_counter()
    norm = resolve_norm(spec)
    sol = continuum.solve_restricted(norm, spec.alpha, control_points=spec.control_points,
                                     restarts=spec.solver_restarts, seed=spec.table_seed,
                                     iterations=spec.solver_iterations)
    times["continuum"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    theta = estimate_theta(spec)
    times["theta"] = time.perf_counter() - t0

    jobs = [(spec, n, s) for n in spec.ns for s in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(_cheeger_row, jobs))
    else:
        records = [_cheeger_row(j) for j in jobs]
    for r in records:
        r.theta, r.phi_cont = theta, sol.phi_hat
        times[f"n={r.n},seed={r.seed}"] = r.runtime
        if r.status != "ok":
            log.warning("row n=%d seed=%d failed: %s", r.n, r.seed, r.status)
        elif r.disconnected:
            log.info("row n=%d seed=%d: %d of %d optimizers are disconnected",
                     r.n, r.seed, r.disconnected, len(r.optimizers))

    table = ScalingTable(spec, records, theta, sol.phi_hat, sol, times)
    cache = {
        "key": spec.key(),
        "rows": [{"n": r.n, "seed": r.seed, "optimizers": [[list(v) for v in o] for o in r.optimizers]}
                 for r in records if r.status == "ok"],
        "families": {k: p.to_dict() for k, p in sol.family_polygons.items()},
    }
    _optimizer_cache_path(spec).write_text(json.dumps(cache, sort_keys=True))
    if spec.out:
        Path(spec.out).write_text(table.to_csv())
        Path(str(spec.out) + ".runtimes.json").write_text(json.dumps(times, indent=1, sort_keys=True))
    return table


# -- shape ---------------------------------------------------------------------------


def _square_symmetries() -> list[np.ndarray]:
    mats = []
    for sx in (1, -1):
        for sy in (1, -1):
            mats.append(np.array([[sx, 0], [0, sy]], dtype=np.float64))
            mats.append(np.array([[0, sx], [sy, 0]], dtype=np.float64))
    return mats


def discrete_region_curves(config: lattice.Config, vertices, n: int, epsilon: float) -> list[tuple[np.ndarray, list[np.ndarray]]]:
    """Rescaled polygonal outlines (outer, holes) of each connected piece of an optimizer.

    Each piece goes through circuit decomposition, corner rounding and
    polygonal approximation (``epsilon`` in lattice units) before scaling by 1/n.
    """
    norm = continuum.EuclideanNorm()
    sub = lattice.make_subgraph(config, vertices, check=False)
    lab = lattice._components_of(config, sub.mask)
    pieces: dict[int, list] = {}
    for v, idx in zip(sub.coords(), sub.vertices):
        pieces.setdefault(int(lab[idx]), []).append(v)
    out = []
    for _, verts in sorted(pieces.items()):
        dec = rightmost.circuit_decomposition(lattice.make_subgraph(config, verts, check=False))
        outer = continuum.polygonal_approximation(dec.outer_curve, norm, epsilon).points / n
        holes = [continuum.polygonal_approximation(c, norm, epsilon).points / n for c in dec.inner_curves]
        out.append((outer, holes))
    return out


def region_samples(outlines, resolution: float) -> np.ndarray:
    """Boundary plus interior grid samples of a union of polygons with holes."""
    parts = []
    for outer, holes in outlines:
        parts.append(continuum._curve_samples(outer, True, resolution))
        lo, hi = outer.min(axis=0), outer.max(axis=0)
        xs = np.arange(lo[0], hi[0] + resolution, resolution)
        ys = np.arange(lo[1], hi[1] + resolution, resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        keep = geometry.winding_numbers(grid, outer) % 2 == 1
        for h in holes:
            parts.append(continuum._curve_samples(h, True, resolution))
            keep &= geometry.winding_numbers(grid, h) % 2 == 0
        parts.append(grid[keep])
    return np.vstack(parts)


@dataclass
class ShapeRow:
    n: int
    seed: int
    optimizer: int
    distances: dict[str, float]
    status: str = "ok"

    @property
    def best(self) -> tuple[str, float]:
        if not self.distances:
            return "", math.nan
        fam = min(self.distances, key=lambda k: (self.distances[k], k))
        return fam, self.distances[fam]


@dataclass
class ShapeReport:
    rows: list[ShapeRow]

    def headline(self) -> float:
        vals = [r.best[1] for r in self.rows if r.status == "ok" and r.distances]
        return min(vals) if vals else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# perciso-shape v{CSV_VERSION}; columns: " + ",".join(SHAPE_COLUMNS)
                  + "; distance is the l-infinity Hausdorff distance after rescaling by 1/n, minimised over square symmetries\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SHAPE_COLUMNS)
        for r in self.rows:
            if not r.distances:
                w.writerow([r.n, r.seed, r.optimizer, "", "", r.status])
            for fam in sorted(r.distances):
                w.writerow([r.n, r.seed, r.optimizer, fam, f"{r.distances[fam]:.12g}", r.status])
        buf.write(f"# headline: {self.headline():.12g}\n")
        return buf.getvalue()


def run_shape(spec: ExperimentSpec) -> ShapeReport:
    """Distance from each cached discrete optimizer, rescaled by 1/n, to the continuum family optimizers."""
    path = _optimizer_cache_path(spec)
    if not path.exists():
        raise CacheError("no cached optimizers for this experiment: run scaling first")
    try:
        cache = json.loads(path.read_text())
        families = {k: continuum.Polygon.from_dict(v) for k, v in cache["families"].items()}
        rows_in = cache["rows"]
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CacheError(f"optimizer cache {path.name} is unreadable ({exc}): run scaling first") from exc
    res = spec.shape_resolution
    fam_samples = {k: continuum._polygon_samples(p, res) for k, p in families.items()}
    syms = _square_symmetries()
    out = []
    for row in rows_in:
        n, seed = int(row["n"]), int(row["seed"])
        cfg = lattice.sample_config(n, spec.p, row_seed(seed, n), spec.pad)
        for i, opt in enumerate(row["optimizers"][: spec.shape_optimizers]):
            try:
                pts = region_samples(discrete_region_curves(cfg, [tuple(v) for v in opt], n, 0.5), res)
                dist = {k: min(continuum.hausdorff_distance(pts, s @ m.T, res) for m in syms)
                        for k, s in fam_samples.items()}
                out.append(ShapeRow(n, seed, i, dist))
            except Exception as exc:
                out.append(ShapeRow(n, seed, i, {}, f"error: {type(exc).__name__}: {exc}".replace("\n", " ")))
    report = ShapeReport(out)
    if spec.out:
        Path(spec.out).write_text(report.to_csv())
    return report
