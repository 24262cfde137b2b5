from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from markdownopt import cli


def write_spec(path: Path, **overrides) -> Path:
    spec = {"articles": 5, "countries": 2, "weeks": 3, "levels": 3,
            "preset": "hard", "seed": 42}
    spec.update(overrides)
    path.write_text(json.dumps(spec))
    return path


def run_cli(*argv) -> int:
    return cli.main(["--quiet", *argv])


@pytest.fixture
def instance_file(tmp_path) -> Path:
    spec = write_spec(tmp_path / "spec.json")
    out = tmp_path / "instance.json"
    assert run_cli("generate", "--spec", str(spec), "--out", str(out)) == 0
    return out


def strip_timing(event: dict) -> dict:
    return {k: v for k, v in event.items() if k != "wall_ms"}


def read_trace(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_generate_writes_instance_and_manifest(tmp_path, instance_file):
    assert instance_file.exists()
    manifest = json.loads((instance_file.parent / "generate.manifest.json").read_text())
    assert manifest["subcommand"] == "generate"
    assert instance_file.name in manifest["outputs"]
    assert "spec_sha256" in manifest["inputs"]


def test_generate_is_reproducible(tmp_path):
    spec = write_spec(tmp_path / "spec.json")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli("generate", "--spec", str(spec), "--out", str(a)) == 0
    assert run_cli("generate", "--spec", str(spec), "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_rejects_cap_breach(tmp_path):
    spec = write_spec(tmp_path / "spec.json", weeks=40, levels=8)
    rc = run_cli("generate", "--spec", str(spec), "--out", str(tmp_path / "x.json"))
    assert rc == cli.EXIT_INPUT


def test_generate_rejects_missing_file(tmp_path):
    rc = run_cli("generate", "--spec", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "x.json"))
    assert rc == cli.EXIT_INPUT


def test_solve_outputs(tmp_path, instance_file):
    out = tmp_path / "run"
    rc = run_cli("solve", "--instance", str(instance_file), "--out-dir", str(out),
                 "--outer", "4", "--inner", "15", "--strategy", "max-violation",
                 "--dump-pool", str(tmp_path / "pool.json"))
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert {"status", "dual_bound", "mu", "gap_alg1", "gap_dj", "primal"} <= set(summary)
    trace = read_trace(out / "trace.ndjson")
    assert trace[0]["event"] == "exact-lr"
    assert trace[-1]["event"] == "stop"
    offers = json.loads((out / "offers.json").read_text())
    assert len(offers["selection"]) == 5
    assert (tmp_path / "pool.json").exists()
    manifest = json.loads((out / "solve.manifest.json").read_text())
    assert set(manifest["outputs"]) >= {"trace.ndjson", "summary.json", "offers.json"}


def test_solve_exit_zero_when_gap_open(tmp_path, instance_file):
    out = tmp_path / "run_none"
    rc = run_cli("solve", "--instance", str(instance_file), "--out-dir", str(out),
                 "--outer", "2", "--strategy", "none")
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "iteration-limit"
    assert summary["gap_dj"] > 1e-6


def test_solve_thread_count_does_not_change_traces(tmp_path, instance_file):
    outs = []
    for label, threads in (("t1", "1"), ("t4", "4")):
        out = tmp_path / label
        rc = run_cli("solve", "--instance", str(instance_file), "--out-dir",
                     str(out), "--outer", "3", "--inner", "10", "--threads", threads)
        assert rc == 0
        outs.append(out)
    t1 = [strip_timing(e) for e in read_trace(outs[0] / "trace.ndjson")]
    t4 = [strip_timing(e) for e in read_trace(outs[1] / "trace.ndjson")]
    assert t1 == t4


def test_solve_rejects_oversized_disaggregated_master(tmp_path, instance_file):
    out = tmp_path / "run_disagg"
    import markdownopt.master as master_mod
    original = master_mod.DEFAULT_ROW_CAP
    master_mod.DEFAULT_ROW_CAP = 4
    try:
        rc = run_cli("solve", "--instance", str(instance_file), "--out-dir",
                     str(out), "--outer", "3", "--master", "disaggregated")
    finally:
        master_mod.DEFAULT_ROW_CAP = original
    assert rc == cli.EXIT_INPUT


def test_solve_partial_master_flag(tmp_path, instance_file):
    out = tmp_path / "run_partial"
    rc = run_cli("solve", "--instance", str(instance_file), "--out-dir", str(out),
                 "--outer", "2", "--master", "partial:2")
    assert rc == 0
    rc = run_cli("solve", "--instance", str(instance_file), "--out-dir", str(out),
                 "--outer", "2", "--master", "partial:zero")
    assert rc == cli.EXIT_INPUT


def test_compare_csv_columns(tmp_path, instance_file):
    out = tmp_path / "cmp"
    rc = run_cli("compare", "--instance", str(instance_file), "--out-dir", str(out),
                 "--strategies", "none,random,max-violation", "--outer", "3",
                 "--inner", "8")
    assert rc == 0
    with (out / "comparison.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    assert set(rows[0]) == {"strategy", "iteration", "wall_ms", "dual_bound", "mu",
                            "gap_alg1", "gap_d_j", "lambda_norm", "cut_origin"}
    assert {r["strategy"] for r in rows} == {"none", "random", "max-violation"}
    summary = json.loads((out / "comparison_summary.json").read_text())
    assert set(summary["final_gaps"]) == {"none", "random", "max-violation"}


def _dump_pool(tmp_path, instance_file, outer=4) -> Path:
    pool = tmp_path / "pool.json"
    rc = run_cli("solve", "--instance", str(instance_file),
                 "--out-dir", str(tmp_path / "for_pool"), "--outer", str(outer),
                 "--strategy", "none", "--dump-pool", str(pool))
    assert rc == 0
    return pool


def test_bench_pool_heuristic_reaches_disaggregated_level(tmp_path, instance_file):
    pool = _dump_pool(tmp_path, instance_file)
    out = tmp_path / "bench_h.csv"
    rc = run_cli("bench-pool", "--pool", str(pool), "--out", str(out),
                 "--mode", "heuristic")
    assert rc == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    final_gap = float(rows[-1]["gap_to_best"])
    assert abs(final_gap) <= 1e-6


def test_bench_pool_partial_brackets(tmp_path, instance_file):
    pool = _dump_pool(tmp_path, instance_file)
    out = tmp_path / "bench_p.csv"
    rc = run_cli("bench-pool", "--pool", str(pool), "--out", str(out),
                 "--mode", "partial", "--groups", "1,2,n")
    assert rc == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    bounds = [float(r["bound"]) for r in rows]
    assert bounds[0] <= min(bounds) + 1e-9  # single group is the weakest
    assert bounds[-1] >= max(bounds) - 1e-9  # fully split is the strongest


def test_bench_pool_single_cut_gap_zero(tmp_path, instance_file):
    pool = _dump_pool(tmp_path, instance_file, outer=1)
    for mode, extra in (("heuristic", ()), ("partial", ("--groups", "1,n"))):
        out = tmp_path / f"bench_{mode}1.csv"
        rc = run_cli("bench-pool", "--pool", str(pool), "--out", str(out),
                     "--mode", mode, *extra)
        assert rc == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert all(abs(float(r["gap_to_best"])) <= 1e-9 for r in rows)


def test_bench_pool_partial_needs_groups(tmp_path, instance_file):
    pool = _dump_pool(tmp_path, instance_file)
    rc = run_cli("bench-pool", "--pool", str(pool), "--out",
                 str(tmp_path / "x.csv"), "--mode", "partial", "--groups", "")
    assert rc == cli.EXIT_INPUT
