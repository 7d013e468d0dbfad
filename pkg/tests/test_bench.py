import csv
import io
import json

import pytest

from maxrank import bench
from maxrank.bench import ConfigError, parse_config, rows_to_csv, run_scenarios

SMALL = {"grids": [32, 64], "p": [2], "ensemble": {"seed": 3, "samples": 8, "band_limit": 4}}


def _config(*scenarios, **defaults):
    return json.dumps({"defaults": {**SMALL, **defaults}, "scenarios": list(scenarios)})


def test_empty_suite(tmp_path):
    code, rows, summary = run_scenarios(parse_config('{"scenarios": []}'), str(tmp_path))
    assert code == 0 and rows == []
    assert (tmp_path / "bench.csv").read_text() == ",".join(bench.COLUMNS) + "\n"


def test_non_maximal_is_precondition_failed():
    scs = parse_config(_config({"name": "g", "operator": "catalog:gradient", "domain": "disk",
                                "checks": ["solve_residual"]}))
    code, rows, _ = run_scenarios(scs)
    assert code == 0
    assert rows[0]["status"] == "precondition-failed: not maximal rank"


def test_small_scenario_passes(tmp_path):
    scs = parse_config(_config({"name": "cr", "operator": "catalog:cauchy_riemann", "domain": "two_ball",
                                "checks": ["solve_residual", "helmholtz", "idempotence"]}))
    code, rows, summary = run_scenarios(scs, str(tmp_path))
    assert code == 0, [r for r in rows if r["status"] != "pass"]
    assert {r["check"] for r in rows} == {"solve_residual", "helmholtz", "idempotence"}
    got = list(csv.DictReader(io.StringIO((tmp_path / "bench.csv").read_text())))
    assert len(got) == len(rows) and got[0]["schema_version"] == "1"
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["scenarios"][0]["status"] == "pass" and "elapsed_s" in s["metadata"]


def test_weak_korn_scenario():
    scs = parse_config(_config({"name": "w", "operator": {"pair": "grad_curl"}, "domain": "disk",
                                "checks": ["weak_korn"], "grids": [64, 128], "r": [1]}))
    code, rows, _ = run_scenarios(scs)
    assert code == 0, rows
    details = {r["detail"] for r in rows if r["status"] == "pass"}
    assert details == {"delta_W multiplier vs closed form", "decay ratio 64->128", "distance ratio drift"}


def test_weak_korn_needs_pair():
    scs = parse_config(_config({"name": "w", "operator": "catalog:laplacian", "domain": "disk",
                                "checks": ["weak_korn"]}))
    _, rows, _ = run_scenarios(scs)
    assert rows[0]["status"].startswith("precondition-failed")


def test_bad_operator_becomes_error_row():
    scs = parse_config(_config({"name": "x", "operator": "catalog:nope", "domain": "disk"}))
    code, rows, _ = run_scenarios(scs)
    assert code == 1 and rows[0]["status"].startswith("error")


def test_output_is_deterministic_across_threads():
    text = _config({"name": "a", "operator": "catalog:laplacian", "domain": "disk",
                    "checks": ["solve_residual", "constant_drift"]},
                   {"name": "b", "operator": "catalog:divergence", "domain": "square",
                    "checks": ["solve_residual", "kernel_residual"]})
    _, r1, _ = run_scenarios(parse_config(text), threads=1)
    _, r2, _ = run_scenarios(parse_config(text), threads=3)
    assert rows_to_csv(r1) == rows_to_csv(r2)


@pytest.mark.parametrize("text,where", [
    ('{"scenarios": [{"name": "a", "operator": "catalog:laplacian"}]}', "scenarios[0]: missing 'domain'"),
    ('{"scenarios": [{"name": "a", "operator": "catalog:laplacian", "domain": "disk", "grids": [64, 32]}]}',
     "scenarios[0].grids"),
    ('{"scenarios": [{"name": "a", "operator": "catalog:laplacian", "domain": "disk", "p": [3], "r": [2]}]}',
     "scenarios[0].r"),
    ('{"scenarios": [{"name": "a", "operator": "laplacian", "domain": "disk"}]}', "scenarios[0].operator"),
    ('{"scenarios": [{"name": "a", "operator": "catalog:laplacian", "domain": "disk", "checks": ["x"]}]}',
     "scenarios[0].checks"),
    ('{"scenarios": [{"name": "a", "operator": "catalog:laplacian", "domain": "disk", "scheme": "fd3"}]}',
     "scenarios[0].scheme"),
    ('{"scenarios": [\n {"name": "a",,}]}', "line 2, column"),
    ('{"scenarios": [], "extra": 1}', "unknown top-level"),
])
def test_config_errors(text, where):
    with pytest.raises(ConfigError, match=where.replace("[", r"\[").replace("]", r"\]")):
        parse_config(text)


def test_duplicate_names():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(_config({"name": "a", "operator": "catalog:laplacian", "domain": "disk"},
                             {"name": "a", "operator": "catalog:laplacian", "domain": "disk"}))


def test_default_suite_covers_catalog():
    scs = bench.default_suite_scenarios()
    doms = {"disk", "square", "two_ball", "blob"}
    solving = [s for s in scs if "weak_korn" not in s.checks]
    ops = {s.name.split("/")[0] for s in solving}
    assert len(ops) == 9
    for op in ops:
        assert {s.domain for s in solving if s.name.startswith(op + "/")} == doms
    for s in solving:
        assert s.p == (1.5, 2.0, 3.0) and set(s.checks) == set(bench.CHECKS) - {"weak_korn"}
    pairs = {(json.dumps(s.operator, sort_keys=True), s.n) for s in scs if "weak_korn" in s.checks}
    assert len(pairs) == 3


def test_thread_env(monkeypatch):
    monkeypatch.setenv(bench.THREADS_ENV, "3")
    assert bench.thread_count() == 3
    monkeypatch.setenv(bench.THREADS_ENV, "x")
    with pytest.raises(ConfigError):
        bench.thread_count()


def test_csv_float_format():
    row = dict.fromkeys(bench.COLUMNS, "")
    row.update(value=1 / 3, status="pass")
    assert "0.3333333333" in rows_to_csv([row]).splitlines()[1]
