"""Command-line front end.

Exit codes: 0 success / all checks pass, 1 check failures, 2 configuration or
input errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench
from .catalog import CatalogError, catalog_names, catalog_params, make_catalog_operator
from .domains import DomainError
from .fileio import FileFormatError, read_field, read_spec, write_field
from .grid import BoxGrid, GridError, Scheme
from .linalg import DEFAULT_RANK_TOL
from .norms import NormError
from .projections import ProjectionError, korn_project, random_band_limited
from .spectral import SolveError, multiplier_norms, solve, solve_residual
from .symbols import SamplingConfig, SpecError, classify, spec_to_dict

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _params(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise CatalogError(f"--param expects key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k] = v if k == "base" else int(v)
    return out


def _operator(target: str, args):
    """Spec and label from ``catalog:<name>`` or a spec JSON file."""
    if target.startswith("catalog:"):
        name = target.split(":", 1)[1]
        params = _params(getattr(args, "param", None))
        if getattr(args, "n", None) is not None:
            params["n"] = args.n
        keys = catalog_params(name)
        if name == "adjoint_of" and "base" in params:
            keys = catalog_params(params["base"])
        if "n" in keys and "n" not in params:
            params["n"] = 2
        entry = make_catalog_operator(name, **params)
        return entry.spec, entry.label()
    return read_spec(target), os.path.basename(target)


def _write_json(path: str | None, obj) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True)
    print(text)
    if path:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _out_path(args, name: str, explicit: str | None = None) -> str | None:
    if explicit:
        return explicit
    if not args.out_dir:
        return None
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_classify(args) -> int:
    spec, label = _operator(args.target, args)
    cfg = SamplingConfig(seed=args.seed if args.seed is not None else SamplingConfig.seed,
                         rank_tol=args.tol if args.tol is not None else DEFAULT_RANK_TOL)
    c = classify(spec, cfg)
    d = {"operator": label, **c.to_dict()}
    _write_json(_out_path(args, "classification.json"), d)
    return EXIT_OK


def cmd_catalog(args) -> int:
    if args.action == "list":
        for name in catalog_names():
            print(f"{name}\t{','.join(catalog_params(name))}")
        return EXIT_OK
    if not args.name:
        raise CatalogError("catalog dump needs an operator name")
    spec, label = _operator(f"catalog:{args.name}", args)
    _write_json(_out_path(args, "operator.json"), {"name": label, **spec_to_dict(spec)})
    return EXIT_OK


def _grid_from(args, n: int) -> BoxGrid:
    return BoxGrid(n, args.grid or 128, 1.0 if args.L is None else args.L, args.pad or 2)


def cmd_solve(args) -> int:
    spec, label = _operator(args.operator, args)
    if args.rhs:
        f = read_field(args.rhs)
        grid = f.grid
        if args.grid and args.grid != grid.size:
            raise GridError(f"--grid {args.grid} differs from the field file grid {grid.size}")
    else:
        grid = _grid_from(args, spec.n)
        seed = args.seed if args.seed is not None else 0
        f = random_band_limited(grid, spec.dim_w, grid.size // 8, seed)
    mask, dom = bench.resolve_domain(args.mask, grid)
    f = f.masked(mask.cells)
    tol = args.tol if args.tol is not None else DEFAULT_RANK_TOL
    v = solve(spec, f, mask, args.scheme, tol)
    out = _out_path(args, "v.bin", args.out)
    if out:
        write_field(out, v)
    rep = {"operator": label, "domain": dom, "grid": grid.size, "pad": grid.pad, "scheme": args.scheme,
           "residual": solve_residual(spec, v, f, mask, args.scheme),
           "multiplier_norms": multiplier_norms(spec, grid, args.scheme),
           "polynomial_pieces": len(v.polys), "real": v.is_real}
    _write_json(_out_path(args, "report.json", args.report), rep)
    return EXIT_OK


def cmd_project(args) -> int:
    spec, label = _operator(args.operator, args)
    u = read_field(args.u)
    au = read_field(args.au)
    if u.grid != au.grid:
        raise GridError("u and au live on different grids")
    mask, dom = bench.resolve_domain(args.mask, u.grid)
    res = korn_project(spec, u.masked(mask.cells), au, mask, p=args.p, scheme=args.scheme)
    out = _out_path(args, "t_u.bin", args.out)
    if out:
        write_field(out, res.t_u)
    rep = {"operator": label, "domain": dom, "grid": u.grid.size, "p": args.p, "scheme": args.scheme,
           **res.report()}
    _write_json(_out_path(args, "report.json", args.report), rep)
    return EXIT_OK


def cmd_bench(args) -> int:
    path = args.config or bench.DEFAULT_SUITE
    scenarios = bench.load_config(path)
    ladder = args.grid_ladder or ((args.grid // 2, args.grid) if args.grid else None)
    if ladder and any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise bench.ConfigError("grid ladder must be strictly increasing")
    for sc in scenarios:
        if args.seed is not None:
            sc.ensemble = {**sc.ensemble, "seed": args.seed}
        if ladder:
            sc.grids = tuple(ladder)
        if args.pad:
            sc.pad = args.pad
    if args.only:
        scenarios = [sc for sc in scenarios if any(s in sc.name for s in args.only)]
    out_dir = args.out_dir or "bench_out"
    code, rows, summary = bench.run_scenarios(scenarios, out_dir, args.threads)
    print(f"{len(rows)} rows, {summary['failed_rows']} failed; reports in {out_dir}")
    for s in summary["scenarios"]:
        if s["status"] != "pass":
            print(f"FAIL {s['name']}")
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--grid", type=int, help="grid size per axis (power of two)")
    common.add_argument("--pad", type=int, help="padding factor (>= 2)")
    common.add_argument("--tol", type=float, help="relative rank tolerance")
    common.add_argument("--out-dir", dest="out_dir", help="directory for output files")
    common.add_argument("--scheme", default="fd4", help="'spectral' or 'fd<q>' (default fd4)")
    op_args = argparse.ArgumentParser(add_help=False)
    op_args.add_argument("--n", type=int, help="space dimension for catalog operators")
    op_args.add_argument("--param", action="append", help="catalog parameter key=value (repeatable)")

    ap = argparse.ArgumentParser(prog="maxrank", description="Maximal-rank operator toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common, op_args], help="classify an operator")
    p.add_argument("target", help="catalog:<name> or operator JSON file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("catalog", parents=[common, op_args], help="list or dump catalog operators")
    p.add_argument("action", choices=("list", "dump"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("solve", parents=[common, op_args], help="solve A v = f on a masked domain")
    p.add_argument("--operator", required=True)
    p.add_argument("--rhs", help="field file (default: seeded band-limited random data)")
    p.add_argument("--mask", required=True, help="mask file, shape JSON file or family name")
    p.add_argument("--L", type=float)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("project", parents=[common, op_args], help="Korn projection of (u, Au)")
    p.add_argument("--operator", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--au", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("bench", parents=[common], help="run a scenario file (default: shipped suite)")
    p.add_argument("config", nargs="?")
    p.add_argument("--threads", type=int, help=f"worker threads (env {bench.THREADS_ENV})")
    p.add_argument("--only", action="append", help="run scenarios whose name contains this text")
    p.add_argument("--grids", dest="grid_ladder", type=int, nargs="+", help="refinement ladder override")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        Scheme.parse(args.scheme)
        return args.func(args)
    except (bench.ConfigError, SpecError, CatalogError, DomainError, GridError, FileFormatError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolveError, ProjectionError, NormError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
