"""Command-line interface: generate, solve, compare, bench-pool.

Every subcommand writes a manifest next to its primary outputs listing the
resolved configuration, input hashes and produced files. Outputs are
reproducible byte-for-byte for identical inputs except for wall-clock fields
(``wall_ms`` in traces, the ``timings`` block in summaries, ``elapsed``
columns in benchmark CSVs, and the manifest timestamp).

Exit codes: 0 success (even when the gap tolerance was not reached; see the
summary), 2 input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bench, driver, gen, master, model
from .errors import InputError, NumericalError

log = logging.getLogger("markdownopt")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_json_safe(payload), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_manifest(out_dir: Path, subcommand: str, config: dict,
                    inputs: dict[str, str], outputs: list[Path]) -> Path:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": config,
        "inputs": inputs,
        "outputs": [p.name for p in outputs],
        "created_unix": time.time(),
    }
    path = out_dir / f"{subcommand}.manifest.json"
    _write_json(path, manifest)
    return path


def _default_threads() -> int:
    raw = os.environ.get("MARKDOWNOPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parse_master(value: str) -> tuple[str, int]:
    if value == "aggregated" or value == "disaggregated":
        return value, 0
    if value.startswith("partial:"):
        try:
            groups = int(value.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad master variant {value!r}; use partial:<groups>")
        return "partial", groups
    raise InputError(f"unknown master variant {value!r}")


def _driver_config(args) -> driver.DriverConfig:
    variant, groups = _parse_master(args.master)
    return driver.DriverConfig(
        outer_limit=args.outer, inner_limit=args.inner, gap_tol=args.tol_mu,
        efficacy_tol=args.tol_e, strategy=args.strategy,
        master_variant=variant, partial_groups=groups,
        lambda_bar=args.lambda_bar, seed=args.seed, threads=args.threads)


def _config_dict(cfg: driver.DriverConfig) -> dict:
    return {
        "outer_limit": cfg.outer_limit, "inner_limit": cfg.inner_limit,
        "gap_tol": cfg.gap_tol, "efficacy_tol": cfg.efficacy_tol,
        "strategy": cfg.strategy, "master_variant": cfg.master_variant,
        "partial_groups": cfg.partial_groups, "lambda_bar": cfg.lambda_bar,
        "seed": cfg.seed, "threads": cfg.threads,
    }


def _write_trace(path: Path, trace: driver.RunTrace) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for event in trace.events:
            fh.write(json.dumps(_json_safe(event.to_json_dict())) + "\n")


def _offer_dict(offer: model.Offer) -> dict:
    return {
        "article_id": offer.article_id,
        "discount_index": [list(p) for p in offer.discount_index],
        "profit": offer.profit,
        "contributions": list(offer.contributions),
        "first_week_sales": list(offer.first_week_sales),
        "first_week_price": list(offer.first_week_price),
        "base_price": list(offer.base_price),
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = gen.load_spec(Path(args.spec))
    instance = gen.generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save_instance(instance, out)
    manifest = _write_manifest(out.parent, "generate",
                               {"spec": json.loads(Path(args.spec).read_text())},
                               {"spec_sha256": _sha256(Path(args.spec))},
                               [out])
    log.info("instance written to %s (sha256 %s)", out, _sha256(out))
    log.info("manifest: %s", manifest)
    return EXIT_OK


def cmd_solve(args) -> int:
    instance_path = Path(args.instance)
    instance = model.load_instance(instance_path)
    config = _driver_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.ndjson"
    summary_path = out_dir / "summary.json"
    offers_path = out_dir / "offers.json"
    try:
        result = driver.run(instance, config)
    except NumericalError as exc:
        trace = getattr(exc, "trace", None)
        if trace is not None:
            _write_trace(trace_path, trace)
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERICAL
    _write_trace(trace_path, result.trace)
    _write_json(summary_path, result.summary())
    offers_payload = {
        "selection": list(result.primal.selection),
        "objective": result.primal.objective,
        "offers": ([_offer_dict(o) for o in result.primal.offers]
                   if result.primal.offers is not None else None),
    }
    _write_json(offers_path, offers_payload)
    outputs = [trace_path, summary_path, offers_path]
    if args.dump_pool:
        pool_path = Path(args.dump_pool)
        pool_path.parent.mkdir(parents=True, exist_ok=True)
        master.save_pool(result.pool, pool_path)
        outputs.append(pool_path)
    _write_manifest(out_dir, "solve", _config_dict(config),
                    {"instance_sha256": _sha256(instance_path)}, outputs)
    log.info("status=%s dual=%.6g mu=%.6g gap_dj=%s", result.status,
             result.dual_bound, result.mu, result.gap_dj)
    return EXIT_OK


def cmd_compare(args) -> int:
    instance_path = Path(args.instance)
    instance = model.load_instance(instance_path)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise InputError("no strategies given")
    configs = {}
    for name in strategies:
        ns = argparse.Namespace(**vars(args))
        ns.strategy = name
        configs[name] = _driver_config(ns)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        comparison = driver.compare_strategies(instance, configs)
    except NumericalError as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERICAL
    csv_path = out_dir / "comparison.csv"
    columns = ["strategy", "iteration", "wall_ms", "dual_bound", "mu",
               "gap_alg1", "gap_d_j", "lambda_norm", "cut_origin"]
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in comparison.csv_rows():
            writer.writerow(_json_safe(row))
    summary_path = out_dir / "comparison_summary.json"
    _write_json(summary_path, {
        "final_gaps": comparison.final_gaps(),
        "time_to_gap": {name: {str(t): v for t, v in row.items()}
                        for name, row in comparison.time_to_gap().items()},
    })
    _write_manifest(out_dir, "compare",
                    {name: _config_dict(cfg) for name, cfg in configs.items()},
                    {"instance_sha256": _sha256(instance_path)},
                    [csv_path, summary_path])
    return EXIT_OK


def cmd_bench_pool(args) -> int:
    pool_path = Path(args.pool)
    pool = master.load_pool(pool_path)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    reference = bench.best_bound(pool.copy(), row_cap=args.row_cap)
    rows = []
    if args.mode == "heuristic":
        work = pool.copy()
        replay = bench.replay_max_violation(
            work, max_applications=args.max_applications)
        if reference is None:
            reference = replay.terminal_bound
        for p in replay.points:
            rows.append({"mode": "heuristic", "label": p.label, "groups": "",
                         "elapsed_s": p.elapsed, "bound": p.bound,
                         "gap_to_best": bench.gap_to_best(p.bound, reference)})
    else:
        group_counts = []
        for token in args.groups.split(","):
            token = token.strip()
            if not token:
                continue
            group_counts.append(pool.n_articles if token == "n" else int(token))
        if not group_counts:
            raise InputError("partial mode needs --groups")
        ladder = bench.partial_ladder(pool, group_counts, seed=args.seed,
                                      row_cap=args.row_cap)
        if reference is None:
            reference = max(p.bound for p in ladder)
        for p in ladder:
            rows.append({"mode": "partial", "label": f"partial-{p.groups}",
                         "groups": p.groups, "elapsed_s": p.solve_seconds,
                         "bound": p.bound,
                         "gap_to_best": bench.gap_to_best(p.bound, reference)})
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["mode", "label", "groups",
                                                "elapsed_s", "bound", "gap_to_best"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    _write_manifest(out.parent, "bench-pool",
                    {"mode": args.mode, "groups": getattr(args, "groups", ""),
                     "seed": args.seed, "max_applications": args.max_applications,
                     "row_cap": args.row_cap},
                    {"pool_sha256": _sha256(pool_path)}, [out])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--outer", type=int, default=10, help="outer iteration limit")
    p.add_argument("--inner", type=int, default=100, help="heuristic cuts per outer iteration")
    p.add_argument("--tol-mu", dest="tol_mu", type=float, default=1e-6,
                   help="relative gap tolerance")
    p.add_argument("--tol-e", dest="tol_e", type=float, default=1.0,
                   help="efficacy threshold for heuristic cuts")
    p.add_argument("--strategy", default="max-violation",
                   choices=list(driver.STRATEGIES), help="heuristic cut strategy")
    p.add_argument("--master", default="aggregated",
                   help="master formulation: aggregated | partial:<groups> | disaggregated")
    p.add_argument("--lambda-bar", dest="lambda_bar", type=float, default=None,
                   help="override the multiplier box bound")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="article solver threads (results are thread-count independent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markdownopt",
        description="Lagrangian-decomposition cutting-plane solver for markdown pricing")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a seeded synthetic instance")
    p.add_argument("--spec", required=True, help="generation spec JSON")
    p.add_argument("--out", required=True, help="instance output path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run the cutting-plane solver on an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-pool", default=None, help="also dump the final cut pool")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several strategies on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--strategies", required=True,
                   help="comma list, e.g. none,random,max-violation")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench-pool", help="time-to-gap benchmarks on a frozen pool")
    p.add_argument("--pool", required=True, help="pool dump JSON")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--mode", choices=("heuristic", "partial"), default="heuristic")
    p.add_argument("--groups", default="", help="partial mode: comma list of group counts ('n' = articles)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-applications", dest="max_applications", type=int, default=None)
    p.add_argument("--row-cap", dest="row_cap", type=int, default=None)
    p.set_defaults(func=cmd_bench_pool)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr,
                        force=True)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
