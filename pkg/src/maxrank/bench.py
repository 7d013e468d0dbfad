"""Scenario runner: catalog x domain x exponent checks with CSV and JSON reports.

A config is a JSON object ``{"scenarios": [...], "defaults": {...}}``. Each
scenario has::

    name        unique label
    operator    "catalog:<name>" | {"catalog": name, "params": {...}}
                | {"pair": "grad_curl" | "d_d", "params": {...}} | {"file": "spec.json"}
    domain      mask family name | shape expression | {"file": path}
    n, L, pad   grid dimension, box length, padding factor
    grids       strictly increasing powers of two (the refinement ladder)
    p           exponents; r: negative orders (ints or "k"), r > 0 only with p = 2
    ensemble    {"seed", "samples", "band_limit"}; band_limit defaults to grids[0] // 8
    checks      subset of CHECKS
    scheme      discretization of solves ("fd4" default)

Keys missing from a scenario are taken from ``defaults``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .catalog import CatalogError, catalog_annihilator, make_catalog_operator
from .domains import MASK_FAMILIES, DomainError, DomainMask, family_shape, make_domain
from .grid import BoxGrid, GridError, GridField, Scheme, SPECTRAL
from .norms import interior_residual, lp_norm, neg_sobolev_norm_2, refine_cells, stencil_reach
from .projections import (EnsembleConfig, empirical_constant, delta_w_multiplier, drift,
                          interior_fd_data, korn_project, measure_exponent, random_band_limited,
                          weak_korn_project)
from .spectral import apply_operator, lattice_wavevectors, solve, solve_residual
from .symbols import AnnihilatorPair, OperatorSpec, SpecError, classify, generalized_laplacian

SCHEMA_VERSION = 1
CHECKS = ("solve_residual", "idempotence", "kernel_residual", "constant_drift",
          "helmholtz", "weak_korn", "measure_data")
COLUMNS = ("schema_version", "scenario", "operator", "domain", "grid", "p", "r", "check",
           "status", "value", "threshold", "max_ratio", "median_ratio", "drift",
           "running_change", "kernel_residual", "detail")
THREADS_ENV = "MAXRANK_THREADS"

# acceptance thresholds
SOLVE_TOL = 1e-8
ORDER_BAND = 0.2
DRIFT_TOL = 0.2
RUNNING_TOL = 0.1
HELMHOLTZ_TOL = 1e-6
CLOSED_FORM_TOL = 1e-10
SOLVE_SAMPLES = 4


class ConfigError(ValueError):
    """Malformed scenario configuration (exit code 2)."""


@dataclass
class Scenario:
    name: str
    operator: object
    domain: object
    n: int = 2
    L: float = 1.0
    pad: int = 2
    grids: tuple = (128, 256)
    p: tuple = (2.0,)
    r: tuple = (0,)
    ensemble: dict = field(default_factory=dict)
    checks: tuple = ("solve_residual",)
    scheme: str = "fd4"
    base_dir: str = "."

    def ensemble_config(self) -> EnsembleConfig:
        e = self.ensemble
        return EnsembleConfig(int(e.get("seed", 0)), int(e.get("samples", 64)),
                              int(e.get("band_limit") or self.grids[0] // 8))


# ----------------------------------------------------------------- parsing

def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def parse_config(text: str, base_dir: str = ".") -> list[Scenario]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if isinstance(doc, list):
        doc = {"scenarios": doc}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object with a 'scenarios' list")
    unknown = set(doc) - {"scenarios", "defaults", "description", "schema_version"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    defaults = doc.get("defaults", {})
    items = doc.get("scenarios", [])
    if not isinstance(items, list):
        raise ConfigError("'scenarios' must be a list")
    out, names = [], set()
    for i, raw in enumerate(items):
        if not isinstance(raw, dict):
            _fail(f"scenarios[{i}]", "scenario must be an object")
        sc = _parse_scenario({**defaults, **raw}, f"scenarios[{i}]", base_dir)
        if sc.name in names:
            _fail(f"scenarios[{i}]", f"duplicate scenario name {sc.name!r}")
        names.add(sc.name)
        out.append(sc)
    return out


def _parse_scenario(d: dict, where: str, base_dir: str) -> Scenario:
    allowed = {"name", "operator", "domain", "n", "L", "pad", "grids", "p", "r", "ensemble",
               "checks", "scheme"}
    extra = set(d) - allowed
    if extra:
        _fail(where, f"unknown keys {sorted(extra)}")
    for key in ("name", "operator", "domain"):
        if key not in d:
            _fail(where, f"missing {key!r}")
    grids = d.get("grids", [128, 256])
    if (not isinstance(grids, list) or not grids
            or any(not isinstance(g, int) or g < 4 or g & (g - 1) for g in grids)
            or any(b <= a for a, b in zip(grids, grids[1:]))):
        _fail(f"{where}.grids", "must be a strictly increasing list of powers of two >= 4")
    ps = d.get("p", [2.0])
    if not isinstance(ps, list) or not ps or any(not isinstance(p, (int, float)) or p < 1 for p in ps):
        _fail(f"{where}.p", "must be a non-empty list of exponents >= 1")
    rs = d.get("r", [0])
    if not isinstance(rs, list) or any(not (r == "k" or (isinstance(r, int) and r >= 0)) for r in rs):
        _fail(f"{where}.r", "entries must be non-negative integers or 'k'")
    if any(r != 0 for r in rs) and 2.0 not in [float(p) for p in ps]:
        _fail(f"{where}.r", "r > 0 requires p = 2 in the exponent list")
    checks = d.get("checks", ["solve_residual"])
    if not isinstance(checks, list) or any(c not in CHECKS for c in checks):
        _fail(f"{where}.checks", f"entries must be among {list(CHECKS)}")
    ens = d.get("ensemble", {})
    if not isinstance(ens, dict) or set(ens) - {"seed", "samples", "band_limit"}:
        _fail(f"{where}.ensemble", "expects an object with seed, samples, band_limit")
    if int(ens.get("samples", 64)) < 1:
        _fail(f"{where}.ensemble.samples", "must be >= 1")
    try:
        Scheme.parse(d.get("scheme", "fd4"))
    except GridError as exc:
        _fail(f"{where}.scheme", str(exc))
    op = d["operator"]
    if isinstance(op, str) and not op.startswith("catalog:"):
        _fail(f"{where}.operator", "string operators must look like 'catalog:<name>'")
    if isinstance(op, dict) and not ({"catalog", "pair", "file"} & set(op)):
        _fail(f"{where}.operator", "object needs one of 'catalog', 'pair', 'file'")
    try:
        return Scenario(str(d["name"]), op, d["domain"], int(d.get("n", 2)), float(d.get("L", 1.0)),
                        int(d.get("pad", 2)), tuple(grids), tuple(float(p) for p in ps), tuple(rs),
                        dict(ens), tuple(checks), str(d.get("scheme", "fd4")), base_dir)
    except (TypeError, ValueError) as exc:
        _fail(where, str(exc))


def load_config(path: str) -> list[Scenario]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return parse_config(text, os.path.dirname(os.path.abspath(path)))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolve_operator(op, n: int, base_dir: str = ".") -> tuple[OperatorSpec, AnnihilatorPair | None, str]:
    """Operator spec, optional annihilator pair, and a label."""
    from .fileio import read_spec
    if isinstance(op, str):
        op = {"catalog": op.split(":", 1)[1]}
    params = dict(op.get("params", {}))
    if "pair" in op:
        params.setdefault("n", n)
        pair = catalog_annihilator(op["pair"], **params)
        return pair.a, pair, f"{op['pair']}({','.join(f'{k}={v}' for k, v in params.items())})"
    if "file" in op:
        path = op["file"] if os.path.isabs(op["file"]) else os.path.join(base_dir, op["file"])
        return read_spec(path), None, os.path.basename(path)
    name = op["catalog"]
    if name != "cauchy_riemann" and "n" not in params:
        params["n"] = n
    entry = make_catalog_operator(name, **params)
    return entry.spec, None, entry.label()


def resolve_domain(dom, grid: BoxGrid, base_dir: str = ".") -> tuple[DomainMask, str]:
    from .fileio import load_mask
    if isinstance(dom, str):
        if dom in MASK_FAMILIES or dom in ("full", "annulus"):
            return make_domain(grid, family_shape(dom, grid.n, grid.L)), dom
        path = dom if os.path.isabs(dom) else os.path.join(base_dir, dom)
        return load_mask(path, grid, base_dir), os.path.basename(dom)
    if isinstance(dom, dict) and set(dom) == {"file"}:
        path = dom["file"] if os.path.isabs(dom["file"]) else os.path.join(base_dir, dom["file"])
        return load_mask(path, grid, base_dir), os.path.basename(path)
    return make_domain(grid, dom, base_dir=base_dir), "shape"


# ------------------------------------------------------------------ checks

def _row(sc: Scenario, op: str, dom: str, grid, p, r, check, status, value=None, threshold=None,
         **extra) -> dict:
    row = dict.fromkeys(COLUMNS, "")
    row.update(schema_version=SCHEMA_VERSION, scenario=sc.name, operator=op, domain=dom,
               grid=grid if grid is not None else "", p="" if p is None else p,
               r="" if r is None else r, check=check, status=status)
    row["value"] = "" if value is None else value
    row["threshold"] = "" if threshold is None else threshold
    row.update(extra)
    return row


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _grids(sc: Scenario):
    for s in sc.grids:
        yield BoxGrid(sc.n, s, sc.L, sc.pad)


def _sample(grid: BoxGrid, dim: int, ens: EnsembleConfig, i: int) -> GridField:
    return random_band_limited(grid, dim, ens.band_limit, ens.seed, i)


def _check_solve(sc, spec, masks, op, dom):
    ens = sc.ensemble_config()
    rows = []
    for grid, mask in masks:
        worst = 0.0
        for i in range(min(SOLVE_SAMPLES, ens.samples)):
            f = _sample(grid, spec.dim_w, ens, 10_000 + i).masked(mask.cells)
            v = solve(spec, f, mask, sc.scheme)
            worst = max(worst, solve_residual(spec, v, f, mask, sc.scheme))
        rows.append(_row(sc, op, dom, grid.size, None, None, "solve_residual",
                         _status(worst <= SOLVE_TOL), worst, SOLVE_TOL))
    return rows


def _order_rows(sc, op, dom, check, residuals, masks, q, reach_spec):
    """Per-grid residual rows plus a stencil-order decay verdict on the finest pair."""
    rows = []
    for (grid, _), res in zip(masks, residuals):
        rows.append(_row(sc, op, dom, grid.size, None, None, check, "info", res[0],
                         kernel_residual=res[0]))
    if len(masks) >= 2:
        (g0, m0), (g1, m1) = masks[-2], masks[-1]
        coarse_inner = m0.interior(stencil_reach(reach_spec, q))
        factor = g1.size // g0.size
        region = refine_cells(coarse_inner, factor) & m1.interior(stencil_reach(reach_spec, q))
        c_res, f_res = residuals[-2][1](None), residuals[-1][1](region)
        target = float(factor) ** q
        ratio = c_res / f_res if f_res > 0 else float("inf")
        ok = abs(ratio - target) <= ORDER_BAND * target
        rows.append(_row(sc, op, dom, g1.size, None, None, check, _status(ok), ratio, target,
                         kernel_residual=f_res, detail=f"decay ratio {g0.size}->{g1.size}"))
    return rows


def _check_kernel(sc, spec, masks, op, dom):
    ens = sc.ensemble_config()
    q = Scheme.parse(sc.scheme).order if Scheme.parse(sc.scheme).kind == "fd" else 4
    residuals = []
    for grid, mask in masks:
        u = _sample(grid, spec.dim_v, ens, 0)
        au = apply_operator(spec, u, SPECTRAL).masked(mask.cells)
        t = korn_project(spec, u, au, mask, scheme=sc.scheme).t_u
        full = interior_residual(spec, t, mask, q).value
        residuals.append((full, lambda reg, t=t, mask=mask: interior_residual(spec, t, mask, q, region=reg).value))
    return _order_rows(sc, op, dom, "kernel_residual", residuals, masks, q, spec)


IDEMPOTENCE_FACTOR = 2.0


def idempotence_tolerance(grid: BoxGrid, band_limit: int, q: int) -> float:
    """A-priori size of the relative stencil truncation error at the band limit."""
    return (2 * np.pi * band_limit * grid.h / grid.L) ** q


def stencil_error_field(spec, u, au, mask, q):
    """Exact-symbol solve of the interior truncation residual ``(A_h - A) u``.

    Feeding ``(t_u, A_h t_u)`` back into the projection returns ``t_u`` minus
    exactly this field, so its size is the stencil tolerance for idempotence.
    """
    inner = mask.interior(stencil_reach(spec, q))
    r = (interior_fd_data(spec, u, mask, q).data - np.asarray(au.data)) * inner
    return solve(spec, GridField(u.grid, r), mask, SPECTRAL)


def _check_idempotence(sc, spec, masks, op, dom):
    ens = sc.ensemble_config()
    q = Scheme.parse(sc.scheme).order if Scheme.parse(sc.scheme).kind == "fd" else 4
    rows = []
    for grid, mask in masks:
        u = _sample(grid, spec.dim_v, ens, 0)
        au = apply_operator(spec, u, SPECTRAL).masked(mask.cells)
        t = korn_project(spec, u, au, mask, scheme=sc.scheme).t_u
        at = interior_fd_data(spec, t, mask, q)
        err = stencil_error_field(spec, u, au, mask, q)
        prior = idempotence_tolerance(grid, ens.band_limit, q)
        for p in sc.p:
            t2 = korn_project(spec, t, at, mask, p=p, scheme=sc.scheme).t_u
            nu = lp_norm(u, mask, p).value
            val = lp_norm(t2 - t, mask, p).value / nu
            tol = IDEMPOTENCE_FACTOR * lp_norm(err, mask, p).value / nu
            rows.append(_row(sc, op, dom, grid.size, p, None, "idempotence",
                             _status(val <= tol), val, tol,
                             detail=f"band_truncation={prior:.4g}"))
    return rows


def _check_helmholtz(sc, spec, masks, op, dom):
    ens = sc.ensemble_config()
    rows = []
    for grid, mask in masks:
        f = _sample(grid, spec.dim_w, ens, 20_000).masked(mask.cells)
        w0 = solve(spec, f, mask, sc.scheme)
        for p in sc.p:
            res = korn_project(spec, w0.masked(mask.cells), f, mask, p=p, scheme=sc.scheme)
            val = lp_norm(res.t_u, mask, p).value / lp_norm(w0, mask, p).value
            rows.append(_row(sc, op, dom, grid.size, p, None, "helmholtz",
                             _status(val <= HELMHOLTZ_TOL), val, HELMHOLTZ_TOL,
                             max_ratio=res.norms.get("C_sobolev", "")))
    return rows


def _constant_rows(sc, spec, masks, op, dom, reports, key_of, check, labels):
    rows = []
    for (label_p, label_r), key in zip(labels, key_of):
        maxes = []
        for (grid, _), rep in zip(masks, reports):
            s = rep.summary(key)
            maxes.append(s["max"])
            rows.append(_row(sc, op, dom, grid.size, label_p, label_r, check, "info", s["max"],
                             max_ratio=s["max"], median_ratio=s["median"],
                             running_change=s["running_change"],
                             detail=f"kernel_hits={rep.kernel_hits}"))
        s = reports[-1].summary(key)
        d = drift(maxes[-2], maxes[-1]) if len(maxes) >= 2 else float("nan")
        ok = (np.isfinite(s["max"]) and d < DRIFT_TOL and s["running_change"] < RUNNING_TOL)
        rows.append(_row(sc, op, dom, masks[-1][0].size, label_p, label_r, check, _status(ok), d,
                         DRIFT_TOL, max_ratio=s["max"], median_ratio=s["median"], drift=d,
                         running_change=s["running_change"], detail="drift and running max"))
    return rows


def _constant_reports(sc, spec, masks, measure):
    ens = sc.ensemble_config()
    return [empirical_constant(spec, g, m, sc.p, ens, scheme=sc.scheme, measure=measure)
            for g, m in masks]


def _r_values(sc, k):
    return sorted({k if r == "k" else int(r) for r in sc.r})


def _check_constants(sc, spec, masks, op, dom, reports):
    keys, labels = [], []
    for r in _r_values(sc, spec.order):
        if r == 0:
            for p in sc.p:
                keys.append(("sobolev", p, 0))
                labels.append((p, 0))
        elif 2.0 in sc.p:
            if r != spec.order:
                continue
            keys.append(("neg", 2.0, r))
            labels.append((2.0, r))
    return _constant_rows(sc, spec, masks, op, dom, reports, keys, "constant_drift", labels)


def _check_measure(sc, spec, masks, op, dom, reports):
    qm = measure_exponent(sc.n)
    return _constant_rows(sc, spec, masks, op, dom, reports, [("measure", qm, 0)], "measure_data",
                          [(qm, 0)])


def weak_korn_ratio(pair, grid, mask, ens, scheme):
    """Max over the ensemble of ``||u - Pi u||_{L2} / ||A u||_{H^-k(box)}`` and its running change."""
    vals = []
    for i in range(ens.samples):
        u = _sample(grid, pair.a.dim_v, ens, i)
        res = weak_korn_project(pair, u, mask, scheme=scheme)
        den = res.norms["au_neg_k"].value
        if den > 0:
            vals.append(res.norms["w_lp"].value / den)
    v = np.array(vals)
    half = v[: max(1, v.size // 2)]
    return float(v.max()), float(np.median(v)), float(abs(v.max() - half.max()) / v.max())


def _check_weak_korn(sc, pair, masks, op, dom):
    rows = []
    if pair is None:
        return [_row(sc, op, dom, None, None, None, "weak_korn",
                     "precondition-failed: no annihilator pair")]
    ens = sc.ensemble_config()
    scheme = Scheme.parse(sc.scheme)
    q = scheme.order if scheme.kind == "fd" else 4
    lap = generalized_laplacian(pair.a)
    # closed form of the W-Laplacian multiplier
    g0 = masks[0][0]
    tab = delta_w_multiplier(pair, g0, SPECTRAL).values
    xi = lattice_wavevectors(g0, SPECTRAL)
    kk = np.sum(xi ** 2, axis=-1) ** (pair.a.order * pair.q.order)
    eye = np.eye(tab.shape[0]).reshape(tab.shape[:2] + (1,) * g0.n)
    cf = eye * kk
    err = float(np.abs(tab - cf).max() / np.abs(cf).max())
    rows.append(_row(sc, op, dom, g0.size, None, None, "weak_korn", _status(err <= CLOSED_FORM_TOL),
                     err, CLOSED_FORM_TOL, detail="delta_W multiplier vs closed form"))
    residuals = []
    for grid, mask in masks:
        u = _sample(grid, pair.a.dim_v, ens, 0)
        t = weak_korn_project(pair, u, mask, scheme=scheme).t_u
        full = interior_residual(lap, t, mask, q).value
        residuals.append((full, lambda reg, t=t, mask=mask: interior_residual(lap, t, mask, q, region=reg).value))
    rows += _order_rows(sc, op, dom, "weak_korn", residuals, masks, q, lap)
    maxes = []
    for grid, mask in masks:
        mx, med, rc = weak_korn_ratio(pair, grid, mask, ens, scheme)
        maxes.append(mx)
        rows.append(_row(sc, op, dom, grid.size, 2.0, pair.a.order, "weak_korn", "info", mx,
                         max_ratio=mx, median_ratio=med, running_change=rc))
    d = drift(maxes[-2], maxes[-1]) if len(maxes) >= 2 else float("nan")
    rows.append(_row(sc, op, dom, masks[-1][0].size, 2.0, pair.a.order, "weak_korn",
                     _status(d < DRIFT_TOL), d, DRIFT_TOL, max_ratio=maxes[-1], drift=d,
                     detail="distance ratio drift"))
    return rows


SOLVING_CHECKS = ("solve_residual", "idempotence", "kernel_residual", "constant_drift",
                  "helmholtz", "measure_data")


def run_scenario(sc: Scenario) -> list[dict]:
    """All rows for one scenario; errors become rows instead of exceptions."""
    try:
        spec, pair, op = resolve_operator(sc.operator, sc.n, sc.base_dir)
    except (SpecError, CatalogError, OSError, KeyError, TypeError) as exc:
        return [_row(sc, str(sc.operator), str(sc.domain), None, None, None, c,
                     f"error: {exc}") for c in sc.checks]
    dom = sc.domain if isinstance(sc.domain, str) else "shape"
    try:
        masks = []
        for g in _grids(sc):
            m, dom = resolve_domain(sc.domain, g, sc.base_dir)
            masks.append((g, m))
    except (DomainError, GridError, OSError, ValueError) as exc:
        return [_row(sc, op, dom, None, None, None, c, f"error: {exc}") for c in sc.checks]
    maximal = classify(spec).is_maximal_rank
    rows: list[dict] = []
    reports = None
    for check in sc.checks:
        if check in SOLVING_CHECKS and not maximal:
            rows.append(_row(sc, op, dom, None, None, None, check,
                             "precondition-failed: not maximal rank"))
            continue
        try:
            if check == "solve_residual":
                rows += _check_solve(sc, spec, masks, op, dom)
            elif check == "kernel_residual":
                rows += _check_kernel(sc, spec, masks, op, dom)
            elif check == "idempotence":
                rows += _check_idempotence(sc, spec, masks, op, dom)
            elif check == "helmholtz":
                rows += _check_helmholtz(sc, spec, masks, op, dom)
            elif check in ("constant_drift", "measure_data"):
                if reports is None:
                    reports = _constant_reports(sc, spec, masks, "measure_data" in sc.checks)
                fn = _check_constants if check == "constant_drift" else _check_measure
                rows += fn(sc, spec, masks, op, dom, reports)
            elif check == "weak_korn":
                rows += _check_weak_korn(sc, pair, masks, op, dom)
        except Exception as exc:  # noqa: BLE001 - recorded per row, the suite continues
            rows.append(_row(sc, op, dom, None, None, None, check,
                             f"error: {type(exc).__name__}: {exc}"))
    return rows


# ---------------------------------------------------------------- reports

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def is_failure(status: str) -> bool:
    return status == "fail" or status.startswith("error")


def summarize(scenarios: list[Scenario], rows: list[dict], meta: dict) -> dict:
    per = {}
    for row in rows:
        d = per.setdefault(row["scenario"], {"checks": {}, "status": "pass"})
        c = d["checks"].setdefault(row["check"], {"pass": 0, "fail": 0, "error": 0,
                                                  "precondition_failed": 0, "info": 0})
        st = row["status"]
        if st == "pass":
            c["pass"] += 1
        elif st == "fail":
            c["fail"] += 1
        elif st.startswith("error"):
            c["error"] += 1
        elif st.startswith("precondition-failed"):
            c["precondition_failed"] += 1
        else:
            c["info"] += 1
        if is_failure(st):
            d["status"] = "fail"
    failed = sum(is_failure(r["status"]) for r in rows)
    return {
        "schema_version": SCHEMA_VERSION,
        "metadata": meta,
        "thresholds": {"solve_residual": SOLVE_TOL, "order_band": ORDER_BAND, "drift": DRIFT_TOL,
                       "running_change": RUNNING_TOL, "helmholtz": HELMHOLTZ_TOL,
                       "closed_form": CLOSED_FORM_TOL,
                       "idempotence": f"{IDEMPOTENCE_FACTOR:g} * ||A^-1[(A_h - A) u]||_Lp / ||u||_Lp"},
        "scenarios": [{"name": sc.name, **per.get(sc.name, {"checks": {}, "status": "pass"})}
                      for sc in scenarios],
        "rows": len(rows),
        "failed_rows": failed,
        "status": "fail" if failed else "pass",
    }


def thread_count(default: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return default or min(4, os.cpu_count() or 1)


def run_scenarios(scenarios: list[Scenario], out_dir: str | None = None,
                  threads: int | None = None) -> tuple[int, list[dict], dict]:
    """Run every scenario; returns ``(exit_code, rows, summary)`` and writes
    ``bench.csv`` and ``summary.json`` when ``out_dir`` is given."""
    t0 = time.time()
    workers = threads or thread_count()
    if workers == 1 or len(scenarios) <= 1:
        results = [run_scenario(sc) for sc in scenarios]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_scenario, scenarios))
    rows = [r for rs in results for r in rs]
    meta = {"started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
            "elapsed_s": round(time.time() - t0, 3), "threads": workers,
            "python": platform.python_version(), "numpy": np.__version__}
    summary = summarize(scenarios, rows, meta)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "bench.csv"), "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
    return (1 if summary["failed_rows"] else 0), rows, summary


DEFAULT_SUITE = os.path.join(os.path.dirname(__file__), "data", "default_suite.json")


def default_suite_scenarios() -> list[Scenario]:
    return load_config(DEFAULT_SUITE)
