"""Command-line entry point: ``perciso <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import boundary_norm, cheeger, continuum, harness, lattice

EXIT_OK, EXIT_ARGS, EXIT_DATA = 0, 2, 3


class DataError(Exception):
    pass


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _direction(text: str) -> tuple[float, float]:
    """Either an angle in degrees or a vector ``x,y``."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            t = math.radians(float(parts[0]))
            return (math.cos(t), math.sin(t))
        if len(parts) == 2:
            return (float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"direction must be degrees or x,y, got {text!r}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_snapshot(path: str) -> lattice.Config:
    try:
        return lattice.load_config(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read configuration {path}: {exc}") from exc


# -- subcommands ---------------------------------------------------------------------


def cmd_sample(a) -> None:
    cfg = lattice.sample_config(a.n, a.p, a.seed, a.pad)
    info = {"n": cfg.n, "pad": cfg.pad, "p": cfg.p, "seed": a.seed, "open_fraction": cfg.open_fraction()}
    if cfg.p > 0.5:
        try:
            info["giant_size"] = len(lattice.giant_component(cfg))
        except ValueError:
            info["giant_size"] = 0
    if a.out:
        lattice.save_config(cfg, a.out)
    sys.stdout.write(json.dumps(info, sort_keys=True) + "\n")


def cmd_beta(a) -> None:
    if a.table:
        table = boundary_norm.build_norm_table(a.p, a.resolution, a.scales, a.replicas, a.seed, a.pad)
        _emit(json.dumps(table.to_dict(), indent=1) + "\n", a.out)
        return
    est = boundary_norm.estimate_beta(a.p, a.direction, a.scales, a.replicas, a.seed, a.pad)
    doc = {"p": a.p, "direction": list(a.direction), "beta": est.beta, "stderr": est.stderr,
           "scales": est.scales, "scale_means": est.scale_means, "scale_stderrs": est.scale_stderrs,
           "censored": est.censored, "unvalidated": est.unvalidated}
    _emit(json.dumps(doc, indent=1) + "\n", a.out)


def cmd_cheeger(a) -> None:
    if a.config:
        cfg = _load_snapshot(a.config)
    else:
        if a.n is None or a.p is None:
            raise ValueError("give --config or both --n and --p")
        cfg = lattice.sample_config(a.n, a.p, a.seed, a.pad)
    host = cheeger.HostGraph.from_subgraph(lattice.giant_component(cfg))
    if host.num_vertices <= a.exact_threshold:
        res = cheeger.cheeger_exact(host, a.exact_threshold)
    else:
        res = cheeger.cheeger_search(host, budget=a.budget, seed=a.seed, restarts=a.restarts)
    _emit(res.to_text(), a.out)


def cmd_solve(a) -> None:
    try:
        norm = continuum.load_norm(a.norm)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(str(exc)) from exc
    res = continuum.solve_restricted(norm, a.alpha, control_points=a.control_points, restarts=a.restarts,
                                     seed=a.seed, iterations=a.iterations)
    _emit(res.to_text(), a.out)


def _spec(a) -> harness.ExperimentSpec:
    return harness.ExperimentSpec(
        p=a.p, ns=tuple(a.n), seeds=tuple(a.seeds if a.seeds else range(a.seed, a.seed + a.replicas)),
        pad=a.pad, norm=a.norm, cheeger_budget=a.budget, out=a.out, workers=a.workers,
    )


def cmd_scale(a) -> None:
    table = harness.run_scaling(_spec(a))
    if not a.out:
        sys.stdout.write(table.to_csv())
    s = table.summary()
    sys.stderr.write(f"n={s['n']}: mean n*Phi = {s['mean_n_phi']:.6g}, predicted {s['predicted']:.6g}\n")


def cmd_shape(a) -> None:
    try:
        report = harness.run_shape(_spec(a))
    except harness.CacheError as exc:
        raise DataError(str(exc)) from exc
    if not a.out:
        sys.stdout.write(report.to_csv())


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perciso", description="Cheeger constants of supercritical percolation clusters.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=seed_default)

    p = sub.add_parser("sample", help="sample a configuration and save a binary snapshot")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--pad", type=int)
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("beta", help="estimate the boundary norm in one direction, or a whole table")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--direction", type=_direction, default=(1.0, 0.0), help="degrees or x,y")
    p.add_argument("--scales", type=_ints, default=[8, 16, 32])
    p.add_argument("--replicas", type=int, default=8)
    p.add_argument("--pad", type=int)
    p.add_argument("--table", action="store_true", help="build a norm table over the first octant")
    p.add_argument("--resolution", type=int, default=5)
    common(p)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("cheeger", help="Cheeger bounds for the giant component")
    p.add_argument("--config", help="binary snapshot written by 'sample'")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--pad", type=int)
    p.add_argument("--budget", type=int, default=20_000)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--exact-threshold", type=int, default=cheeger.EXACT_THRESHOLD)
    common(p)
    p.set_defaults(func=cmd_cheeger)

    p = sub.add_parser("solve", help="solve the restricted continuum problem")
    p.add_argument("--norm", default="euclidean", help="euclidean, l1, linf or a norm-table file")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--control-points", type=int, default=6)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--iterations", type=int, default=600)
    common(p)
    p.set_defaults(func=cmd_solve)

    for name, func, text in (("scale", cmd_scale, "n * Phi_n across an n grid (CSV)"),
                             ("shape", cmd_shape, "optimizer distances to the continuum families (CSV)")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--n", type=_ints, required=True, help="increasing n grid, e.g. 16,32,64")
        p.add_argument("--replicas", type=int, default=1, help="number of consecutive seeds from --seed")
        p.add_argument("--seeds", type=_ints, help="explicit seed list (overrides --replicas)")
        p.add_argument("--pad", type=int)
        p.add_argument("--norm", default="auto")
        p.add_argument("--budget", type=int, default=20_000)
        p.add_argument("--workers", type=int, default=1)
        common(p)
        p.set_defaults(func=func)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.func(args)
    except (DataError, harness.CacheError, FileNotFoundError) as exc:
        sys.stderr.write(f"perciso: {exc}\n")
        return EXIT_DATA
    except (ValueError, lattice.CapacityError) as exc:
        sys.stderr.write(f"perciso: {exc}\n")
        return EXIT_ARGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
