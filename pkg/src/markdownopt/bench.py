"""Frozen-pool benchmarking: bound refinement in isolation.

Given a fixed set of evaluated solutions (a cut pool), two routes tighten the
relaxed primal bound without any further article solves:

* repeatedly apply the maximum-violation combination cut and re-solve the
  aggregated master (each application either strictly cuts off the current
  master solution or proves it optimal over all per-article combinations,
  at which point the bound equals the disaggregated one), or
* solve the partially aggregated master once per group count.

Both are timed and reported as (elapsed, bound, gap-to-best) curves; the
disaggregated bound serves as the best-bound reference when its LP fits the
row cap, otherwise the tightest bound seen is used.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, InputError
from .heuristics import max_violation_cut
from .master import (CutPool, ORIGIN_MAXVIOL, solve_aggregated,
                     solve_disaggregated, solve_partially_aggregated)

STOP_VIOLATION_TOL = 1e-9


@dataclass(frozen=True)
class BenchPoint:
    label: str
    elapsed: float
    bound: float
    applications: int


@dataclass(frozen=True)
class ReplayResult:
    points: tuple[BenchPoint, ...]
    terminal_bound: float
    applications: int
    converged: bool
    lam: np.ndarray


def replay_max_violation(pool: CutPool, max_applications: int | None = None,
                         stop_tol: float = STOP_VIOLATION_TOL) -> ReplayResult:
    """Apply max-violation + master re-solve until no combination cut separates.

    Mutates ``pool`` (copy first to keep the original frozen). The default
    application cap is ten times the squared initial pool size.
    """
    if pool.size == 0:
        raise InputError("replay needs a non-empty pool")
    if max_applications is None:
        max_applications = 10 * pool.size * pool.size
    points = []
    start = time.perf_counter()
    sol = solve_aggregated(pool)
    points.append(BenchPoint(label="initial", elapsed=time.perf_counter() - start,
                             bound=sol.mu, applications=0))
    converged = False
    applications = 0
    while applications < max_applications:
        outcome = max_violation_cut(pool, sol.lam, sol.mu)
        if outcome.violation <= stop_tol * max(1.0, abs(sol.mu)):
            converged = True
            break
        applications += 1
        pool.add_selection_cut(outcome.selection, ORIGIN_MAXVIOL)
        sol = solve_aggregated(pool)
        points.append(BenchPoint(label=f"apply-{applications}",
                                 elapsed=time.perf_counter() - start,
                                 bound=sol.mu, applications=applications))
    return ReplayResult(points=tuple(points), terminal_bound=sol.mu,
                        applications=applications, converged=converged,
                        lam=sol.lam)


def heuristic_refined_bound(pool: CutPool, rounds: int) -> float:
    """Aggregated bound after ``rounds`` max-violation applications (non-mutating)."""
    work = pool.copy()
    result = replay_max_violation(work, max_applications=rounds)
    return result.terminal_bound


@dataclass(frozen=True)
class LadderPoint:
    groups: int
    solve_seconds: float
    bound: float


def partial_ladder(pool: CutPool, group_counts, seed: int = 0,
                   row_cap: int | None = None) -> list[LadderPoint]:
    """Solve the partially aggregated master once per group count, timed."""
    points = []
    for m in group_counts:
        m = int(m)
        start = time.perf_counter()
        sol = solve_partially_aggregated(pool, m, seed=seed, row_cap=row_cap)
        points.append(LadderPoint(groups=m, solve_seconds=time.perf_counter() - start,
                                  bound=sol.mu))
    return points


def best_bound(pool: CutPool, row_cap: int | None = None) -> float | None:
    """Disaggregated bound when its LP fits the row cap, else None."""
    try:
        return solve_disaggregated(pool, row_cap=row_cap).mu
    except CapExceededError:
        return None


def gap_to_best(bound: float, reference: float) -> float:
    """Relative shortfall of ``bound`` against the reference (>= 0 up to fp)."""
    return (reference - bound) / max(1.0, abs(reference))


def time_to_gap(points, reference: float, target: float,
                bound_getter=lambda p: p.bound,
                time_getter=lambda p: p.elapsed) -> float | None:
    """Earliest recorded time at which the gap to ``reference`` is <= target."""
    for p in points:
        if gap_to_best(bound_getter(p), reference) <= target:
            return time_getter(p)
    return None


def ladder_time_to_gap(points: list[LadderPoint], reference: float,
                       target: float) -> float | None:
    """Fastest single aggregation level whose bound reaches the gap target."""
    times = [p.solve_seconds for p in points
             if gap_to_best(p.bound, reference) <= target]
    return min(times) if times else None


def geometric_mean(values) -> float:
    values = [float(v) for v in values]
    if not values or any(v <= 0.0 for v in values):
        raise InputError("geometric mean needs positive values")
    return math.exp(sum(math.log(v) for v in values) / len(values))


def geometric_std(values) -> float:
    """Geometric standard deviation (>= 1; 1 means no spread)."""
    values = [float(v) for v in values]
    if len(values) < 2 or any(v <= 0.0 for v in values):
        raise InputError("geometric std needs at least two positive values")
    logs = np.log(values)
    return float(np.exp(np.std(logs, ddof=1)))
