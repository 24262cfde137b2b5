"""The extended cutting-plane loop with gated heuristic cut rounds.

Outer iterations alternate an exact relaxation evaluation (which is the
expensive separation step and the only place the dual bound can improve)
with a master re-solve. In between, an inner loop adds cheap heuristic cuts,
re-solving the master after each one, and stops as soon as any gate trips:

* the relative gap (dual bound vs. relaxed primal bound mu) is closed,
* the multipliers did not move (componentwise exact by default), or
* the last cut's efficacy fell below the threshold.

Efficacy is measured against the master solution the cut was generated at,
i.e. before the re-solve; after the re-solve the new solution satisfies the
cut by construction, so measuring there would gate every round.

Two gap variants are tracked throughout: the stopping test divides by the
relaxed primal bound mu (with an absolute fallback when mu <= 0), while the
reported convergence measure d_j divides by the dual bound.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, InputError, NumericalError
from .heuristics import (CutRng, HeuristicOutcome, feasibility_cut,
                         max_violation_cut, random_cut)
from .master import (CutPool, MasterSolution, ORIGIN_EXACT, solve_aggregated,
                     solve_disaggregated, solve_partially_aggregated)
from .model import Instance
from .primal import PrimalSolution, build_selection, solve_selection
from .subproblem import DEFAULT_PATH_CAP, LagrangianSolver

log = logging.getLogger("markdownopt")

STRATEGIES = ("none", "random", "max-violation", "feasibility", "mixed")
MASTER_VARIANTS = ("aggregated", "partial", "disaggregated")

SANDWICH_TOL = 1e-7
MU_MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class DriverConfig:
    outer_limit: int = 10
    inner_limit: int = 100
    gap_tol: float = 1e-6
    efficacy_tol: float = 1.0
    strategy: str = "max-violation"
    master_variant: str = "aggregated"
    partial_groups: int = 0
    lambda_bar: float | None = None
    seed: int = 0
    threads: int = 1
    lambda_equality_tol: float = 0.0
    path_cap: int = DEFAULT_PATH_CAP
    primal_node_limit: int = 50_000
    primal_time_limit: float = 30.0

    def __post_init__(self):
        if self.outer_limit < 1:
            raise InputError("outer iteration limit must be >= 1")
        if self.inner_limit < 0:
            raise InputError("inner heuristic-cut limit must be >= 0")
        if self.gap_tol <= 0 or self.efficacy_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.strategy!r}")
        if self.master_variant not in MASTER_VARIANTS:
            raise InputError(f"unknown master variant {self.master_variant!r}")
        if self.master_variant == "partial" and self.partial_groups < 1:
            raise InputError("partial aggregation needs a positive group count")
        if self.lambda_bar is not None and not self.lambda_bar > 0:
            raise InputError("lambda_bar override must be positive")


@dataclass(frozen=True)
class TraceEvent:
    event: str
    outer: int
    inner: int | None
    cuts: int
    dual_bound: float | None
    mu: float | None
    gap_alg1: float | None
    gap_dj: float | None
    lambda_norm: float | None
    lambda_at_bar: int | None
    subproblem_solves: int
    wall_ms: float
    origin: str | None = None
    violation: float | None = None
    efficacy: float | None = None
    duplicate: bool | None = None
    detail: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {
            "event": self.event, "outer": self.outer, "inner": self.inner,
            "cuts": self.cuts, "dual_bound": self.dual_bound, "mu": self.mu,
            "gap_alg1": self.gap_alg1, "gap_dj": self.gap_dj,
            "lambda_norm": self.lambda_norm, "lambda_at_bar": self.lambda_at_bar,
            "subproblem_solves": self.subproblem_solves, "origin": self.origin,
            "violation": self.violation, "efficacy": self.efficacy,
            "duplicate": self.duplicate,
        }
        d.update(self.detail)
        d["wall_ms"] = self.wall_ms
        return d


@dataclass
class RunTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def append(self, event: TraceEvent):
        if self.events:
            prev = self.events[-1]
            if (event.dual_bound is not None and prev.dual_bound is not None
                    and event.event != "exact-lr"
                    and event.dual_bound != prev.dual_bound):
                raise NumericalError("dual bound may only move on exact evaluations")
        self.events.append(event)

    def final(self) -> TraceEvent | None:
        return self.events[-1] if self.events else None

    def master_events(self) -> list[TraceEvent]:
        return [e for e in self.events if e.event == "master-solve"]


@dataclass(frozen=True)
class RunResult:
    config: DriverConfig
    status: str
    dual_bound: float
    mu: float
    gap_alg1: float | None
    gap_dj: float | None
    primal: PrimalSolution
    trace: RunTrace
    pool: CutPool
    outer_iterations: int
    subproblem_solves: int
    wall_seconds: float
    lam: np.ndarray

    def summary(self) -> dict:
        return {
            "status": self.status,
            "dual_bound": self.dual_bound,
            "mu": self.mu,
            "gap_alg1": self.gap_alg1,
            "gap_dj": self.gap_dj,
            "outer_iterations": self.outer_iterations,
            "cuts_total": self.pool.size,
            "subproblem_solves": self.subproblem_solves,
            "lambda_norm": float(np.linalg.norm(self.lam)),
            "lambda_at_bar": int(np.sum(self.lam >= self.pool.lambda_bar * (1 - 1e-12))),
            "primal": {
                "objective": self.primal.objective,
                "profit": self.primal.profit,
                "feasible": self.primal.feasible,
                "max_violation": self.primal.max_violation,
                "proof_gap": self.primal.proof_gap,
                "status": self.primal.status,
            },
            "timings": {"wall_seconds": self.wall_seconds},
        }


def gap_alg1(dual_bound: float, mu: float | None) -> float | None:
    """(dual - mu) / mu; None when mu <= 0 makes the ratio meaningless."""
    if mu is None or mu <= 0.0:
        return None
    return (dual_bound - mu) / mu


def gap_dj(dual_bound: float, mu: float | None) -> float | None:
    """(dual - mu) / dual, the reported relative dual gap."""
    if mu is None or dual_bound == 0.0 or not np.isfinite(dual_bound):
        return None
    return (dual_bound - mu) / dual_bound


def _gap_converged(dual_bound: float, mu: float | None, tol: float) -> bool:
    if mu is None or not np.isfinite(dual_bound):
        return False
    if mu > 0.0:
        return (dual_bound - mu) / mu < tol
    return (dual_bound - mu) < tol * (1.0 + abs(dual_bound))


class _Run:
    """Mutable state of one driver run."""

    def __init__(self, instance: Instance, config: DriverConfig):
        self.instance = instance
        self.config = config
        self.solver = LagrangianSolver(instance, path_cap=config.path_cap,
                                       threads=config.threads)
        self.lambda_bar = (config.lambda_bar if config.lambda_bar is not None
                           else instance.lambda_bar)
        self.pool = CutPool(instance.rhs, self.lambda_bar, instance.n_articles)
        self.trace = RunTrace()
        self.rng = CutRng(config.seed)
        self.dual = np.inf
        self.mu: float | None = None
        self.lam = np.zeros(instance.n_constraints)
        self.prev_mu: float | None = None
        self.start = time.perf_counter()
        self.last_feasibility_pool_size = -1

    def _wall_ms(self) -> float:
        return (time.perf_counter() - self.start) * 1e3

    def _emit(self, event: str, outer: int, inner: int | None = None, **kw):
        dual = None if not np.isfinite(self.dual) else self.dual
        self.trace.append(TraceEvent(
            event=event, outer=outer, inner=inner, cuts=self.pool.size,
            dual_bound=dual, mu=self.mu,
            gap_alg1=None if dual is None else gap_alg1(dual, self.mu),
            gap_dj=None if dual is None else gap_dj(dual, self.mu),
            lambda_norm=float(np.linalg.norm(self.lam)),
            lambda_at_bar=int(np.sum(self.lam >= self.lambda_bar * (1 - 1e-12))),
            subproblem_solves=self.solver.solve_count,
            wall_ms=self._wall_ms(), **kw))

    def _solve_master(self) -> MasterSolution:
        cfg = self.config
        if cfg.master_variant == "aggregated":
            sol = solve_aggregated(self.pool, self.lambda_bar)
        elif cfg.master_variant == "disaggregated":
            sol = solve_disaggregated(self.pool, self.lambda_bar)
        else:
            sol = solve_partially_aggregated(self.pool, cfg.partial_groups,
                                             seed=cfg.seed, lambda_bar=self.lambda_bar)
        if sol.status != "optimal":
            raise NumericalError(f"master solve ended with status {sol.status}")
        if np.isfinite(self.dual) and sol.mu > self.dual + SANDWICH_TOL * max(1.0, abs(self.dual)):
            raise NumericalError(
                f"bound sandwich violated: mu {sol.mu} above dual {self.dual}; "
                "an invalid cut entered the pool")
        if self.prev_mu is not None and sol.mu < self.prev_mu - MU_MONOTONE_TOL * max(1.0, abs(self.prev_mu)):
            raise NumericalError(
                f"relaxed primal bound regressed from {self.prev_mu} to {sol.mu}")
        self.prev_mu = sol.mu
        self.mu = sol.mu
        self.lam = sol.lam
        return sol

    def _heuristic(self, lam, mu) -> HeuristicOutcome | None:
        cfg = self.config
        strategy = cfg.strategy
        if strategy == "random":
            return random_cut(self.pool, self.rng, lam, mu)
        if strategy in ("max-violation", "mixed"):
            return max_violation_cut(self.pool, lam, mu)
        if strategy == "feasibility":
            return self._feasibility(lam, mu)
        raise InputError(f"strategy {strategy!r} has no heuristic generator")

    def _feasibility(self, lam, mu) -> HeuristicOutcome | None:
        if self.pool.size == self.last_feasibility_pool_size:
            raise NumericalError(
                "feasibility heuristic invoked twice without a pool change")
        self.last_feasibility_pool_size = self.pool.size
        return feasibility_cut(self.pool, lam, mu,
                               node_limit=self.config.primal_node_limit,
                               time_limit=self.config.primal_time_limit)


def run(instance: Instance, config: DriverConfig = DriverConfig()) -> RunResult:
    """Execute the full extended cutting-plane algorithm on the instance.

    Aborts raise with the partial trace attached as ``exc.trace``.
    """
    state = _Run(instance, config)
    try:
        return _run_loop(state)
    except (NumericalError, CapExceededError) as exc:
        exc.trace = state.trace
        raise


def _run_loop(state: _Run) -> RunResult:
    config = state.config
    status = "iteration-limit"
    outer_done = 0

    for outer in range(1, config.outer_limit + 1):
        value, offers = state.solver.evaluate(state.lam)
        state.dual = min(state.dual, value)
        state.pool.add_cut(offers, ORIGIN_EXACT)
        state._emit("exact-lr", outer, origin=ORIGIN_EXACT,
                    detail={"lr_value": value})
        state._solve_master()
        state._emit("master-solve", outer)
        outer_done = outer
        log.info("outer %d: dual=%.6g mu=%.6g gap=%s cuts=%d", outer, state.dual,
                 state.mu, gap_dj(state.dual, state.mu), state.pool.size)

        if config.strategy != "none" and config.inner_limit > 0:
            injected_feasibility = False
            for inner in range(1, config.inner_limit + 1):
                lam_before = state.lam
                mu_before = state.mu
                outcome = state._heuristic(lam_before, mu_before)
                if outcome is None:
                    break
                state.pool.add_selection_cut(outcome.selection, outcome.origin)
                state._emit("heuristic-cut", outer, inner, origin=outcome.origin,
                            violation=outcome.violation, efficacy=outcome.efficacy,
                            duplicate=state.pool.cuts[-1].duplicate)
                state._solve_master()
                state._emit("master-solve", outer, inner)
                gate_gap = _gap_converged(state.dual, state.mu, config.gap_tol)
                lam_tol = config.lambda_equality_tol
                if lam_tol > 0.0:
                    lam_same = bool(np.all(np.abs(state.lam - lam_before)
                                           <= lam_tol * (1.0 + np.abs(lam_before))))
                else:
                    lam_same = bool(np.array_equal(state.lam, lam_before))
                gate_eff = outcome.efficacy < config.efficacy_tol
                if gate_gap or lam_same or gate_eff:
                    if (config.strategy == "mixed" and not gate_gap
                            and not injected_feasibility
                            and state.pool.size != state.last_feasibility_pool_size):
                        injected = state._feasibility(state.lam, state.mu)
                        injected_feasibility = True
                        if injected is not None:
                            state.pool.add_selection_cut(injected.selection,
                                                         injected.origin)
                            state._emit("heuristic-cut", outer, inner,
                                        origin=injected.origin,
                                        violation=injected.violation,
                                        efficacy=injected.efficacy,
                                        duplicate=state.pool.cuts[-1].duplicate)
                            state._solve_master()
                            state._emit("master-solve", outer, inner)
                            continue
                    break

        if _gap_converged(state.dual, state.mu, config.gap_tol):
            status = "gap-converged"
            break

    primal = solve_selection(build_selection(state.pool),
                             node_limit=config.primal_node_limit,
                             time_limit=config.primal_time_limit)
    state._emit("primal-heuristic", outer_done,
                detail={"primal_objective": primal.objective,
                        "primal_profit": primal.profit,
                        "primal_feasible": primal.feasible,
                        "primal_max_violation": primal.max_violation,
                        "primal_proof_gap": primal.proof_gap})
    state._emit("stop", outer_done, detail={"status": status})

    return RunResult(config=config, status=status, dual_bound=state.dual,
                     mu=state.mu, gap_alg1=gap_alg1(state.dual, state.mu),
                     gap_dj=gap_dj(state.dual, state.mu), primal=primal,
                     trace=state.trace, pool=state.pool,
                     outer_iterations=outer_done,
                     subproblem_solves=state.solver.solve_count,
                     wall_seconds=time.perf_counter() - state.start,
                     lam=state.lam)


# ---------------------------------------------------------------------------
# Strategy comparison
# ---------------------------------------------------------------------------

DEFAULT_GAP_TARGETS = (1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class StrategyComparison:
    results: dict[str, RunResult]
    gap_targets: tuple[float, ...]

    def curves(self) -> dict[str, list[dict]]:
        out: dict[str, list[dict]] = {}
        for name, result in self.results.items():
            out[name] = [e.to_json_dict() for e in result.trace.events]
        return out

    def final_gaps(self) -> dict[str, float | None]:
        return {name: r.gap_dj for name, r in self.results.items()}

    def time_to_gap(self) -> dict[str, dict[float, float | None]]:
        """Earliest wall time (seconds) each strategy reached each d_j target."""
        out: dict[str, dict[float, float | None]] = {}
        for name, result in self.results.items():
            row: dict[float, float | None] = {}
            for target in self.gap_targets:
                hit = None
                for e in result.trace.master_events():
                    if e.gap_dj is not None and e.gap_dj <= target:
                        hit = e.wall_ms / 1e3
                        break
                row[target] = hit
            out[name] = row
        return out

    def csv_rows(self) -> list[dict]:
        rows = []
        for name, result in self.results.items():
            for e in result.trace.events:
                rows.append({
                    "strategy": name, "iteration": e.cuts,
                    "wall_ms": e.wall_ms, "dual_bound": e.dual_bound,
                    "mu": e.mu, "gap_alg1": e.gap_alg1, "gap_d_j": e.gap_dj,
                    "lambda_norm": e.lambda_norm, "cut_origin": e.origin,
                })
        return rows


def compare_strategies(instance: Instance, configs: dict[str, DriverConfig],
                       gap_targets=DEFAULT_GAP_TARGETS) -> StrategyComparison:
    """Run every config on the same instance; configs must share the seed."""
    if not configs:
        raise InputError("compare_strategies needs at least one config")
    seeds = {cfg.seed for cfg in configs.values()}
    if len(seeds) != 1:
        raise InputError("all compared configs must share one seed")
    results = {name: run(instance, cfg) for name, cfg in configs.items()}
    return StrategyComparison(results=results, gap_targets=tuple(gap_targets))
