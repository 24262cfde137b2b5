"""Primal selection step: pick one pooled iteration per article.

Maximizes scaled profit minus scaled constraint shortfall over the pooled
solutions,

    max  p_scale * profit(x) + v_scale @ delta
    s.t. delta_l <= (A x - rhs)_l,  delta <= 0,  x_i in {X^1_i, .., X^j_i},

where 1/p_scale is the best pooled total profit and 1/v_scale_l the range of
the pooled residuals of row l (degenerate ranges fall back to 1). Solved by
deterministic depth-first branch-and-bound on the per-article assignment with
LP relaxation bounds from the shared simplex. The best pure pooled cut seeds
the incumbent, so the result never falls below any single pooled solution,
and every node's fractional solution is rounded into a candidate. Pools
assembled by combination heuristics carry many per-article duplicates; the
search runs on deduplicated per-article candidates (smallest cut index kept)
which leaves the attainable objective set unchanged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import InputError
from .master import CutPool
from .model import Offer
from .simplex import DenseLP, SimplexStatus

DEFAULT_NODE_LIMIT = 200_000
DEFAULT_TIME_LIMIT = 120.0
_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class SelectionProblem:
    pool: CutPool
    profit_scale: float
    violation_scale: np.ndarray


@dataclass(frozen=True)
class PrimalSolution:
    selection: tuple[int, ...]
    offers: tuple[Offer, ...] | None
    objective: float
    profit: float
    delta: np.ndarray
    violations: np.ndarray
    proof_gap: float
    status: str
    nodes: int

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.violations <= 0.0))

    @property
    def max_violation(self) -> float:
        return float(self.violations.max(initial=0.0))


def build_selection(pool: CutPool) -> SelectionProblem:
    if pool.size == 0:
        raise InputError("selection needs a non-empty pool")
    best = pool.max_total_profit
    profit_scale = 1.0 / best if best > 0.0 else 1.0
    hi, lo = pool.residual_max, pool.residual_min
    ranges = hi - lo
    scale_ref = np.maximum(1.0, np.maximum(np.abs(hi), np.abs(lo)))
    degenerate = ranges <= _RANGE_TOL * scale_ref
    safe = np.where(degenerate, 1.0, ranges)
    violation_scale = np.where(degenerate, 1.0, 1.0 / safe)
    return SelectionProblem(pool=pool, profit_scale=profit_scale,
                            violation_scale=violation_scale)


def _selection_objective(problem: SelectionProblem, profit: float,
                         contrib: np.ndarray) -> tuple[float, np.ndarray]:
    delta = np.minimum(0.0, contrib - problem.pool.rhs)
    value = problem.profit_scale * profit + float(problem.violation_scale @ delta)
    return value, delta


def _score_selection(problem: SelectionProblem, selection: np.ndarray):
    pool = problem.pool
    idx = np.arange(pool.n_articles)
    profit = float(pool.article_profit[idx, selection].sum())
    contrib = pool.article_contribution[idx, selection, :].sum(axis=0)
    value, delta = _selection_objective(problem, profit, contrib)
    return value, profit, contrib, delta


class _Search:
    """Branch-and-bound state over deduplicated per-article candidates."""

    def __init__(self, problem: SelectionProblem):
        self.problem = problem
        pool = problem.pool
        self.n = pool.n_articles
        self.n_lam = pool.n_constraints
        self.rhs = pool.rhs
        # Per article: unique value columns, smallest original cut index first.
        self.cand_k: list[np.ndarray] = []
        self.cand_profit: list[np.ndarray] = []
        self.cand_contrib: list[np.ndarray] = []
        for i in range(self.n):
            seen: dict[bytes, int] = {}
            keep = []
            for k in range(pool.size):
                key = (pool.article_profit[i, k].tobytes()
                       + pool.article_contribution[i, k, :].tobytes())
                if key not in seen:
                    seen[key] = k
                    keep.append(k)
            keep = np.array(keep, dtype=np.int64)
            self.cand_k.append(keep)
            self.cand_profit.append(pool.article_profit[i, keep].copy())
            self.cand_contrib.append(pool.article_contribution[i, keep, :].copy())

    def node_lp(self, fixed: np.ndarray):
        """LP relaxation with articles in ``fixed`` pinned (entry -1 = open)."""
        problem = self.problem
        open_idx = np.flatnonzero(fixed < 0)
        sizes = [self.cand_k[i].shape[0] for i in open_idx]
        n_y = int(sum(sizes))
        n_vars = n_y + self.n_lam
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

        fixed_idx = np.flatnonzero(fixed >= 0)
        fixed_contrib = np.zeros(self.n_lam)
        fixed_profit = 0.0
        pool = problem.pool
        if fixed_idx.size:
            fixed_contrib = pool.article_contribution[
                fixed_idx, fixed[fixed_idx], :].sum(axis=0)
            fixed_profit = float(pool.article_profit[fixed_idx, fixed[fixed_idx]].sum())

        c = np.zeros(n_vars)
        for a, i in enumerate(open_idx):
            c[offsets[a]:offsets[a + 1]] = -problem.profit_scale * self.cand_profit[i]
        c[n_y:] = -problem.violation_scale

        n_rows = open_idx.shape[0] + self.n_lam
        rows = np.zeros((n_rows, n_vars))
        rhs = np.zeros(n_rows)
        senses = []
        for a in range(open_idx.shape[0]):
            rows[a, offsets[a]:offsets[a + 1]] = 1.0
            rhs[a] = 1.0
            senses.append(simplex.EQ)
        for l in range(self.n_lam):
            r = open_idx.shape[0] + l
            rows[r, n_y + l] = 1.0
            for a, i in enumerate(open_idx):
                rows[r, offsets[a]:offsets[a + 1]] = -self.cand_contrib[i][:, l]
            rhs[r] = fixed_contrib[l] - self.rhs[l]
            senses.append(simplex.LE)

        lower = np.concatenate([np.zeros(n_y), np.full(self.n_lam, -np.inf)])
        upper = np.concatenate([np.ones(n_y), np.zeros(self.n_lam)])
        lp = DenseLP(c=c, rows=rows, senses=tuple(senses), rhs=rhs,
                     lower=lower, upper=upper)
        return lp, open_idx, offsets, fixed_profit

    def complete_single(self, fixed: np.ndarray, article: int) -> np.ndarray:
        """Best completion when exactly one article is open: direct scan."""
        pool = self.problem.pool
        fixed_idx = np.flatnonzero(fixed >= 0)
        base_contrib = pool.article_contribution[
            fixed_idx, fixed[fixed_idx], :].sum(axis=0)
        base_profit = float(pool.article_profit[fixed_idx, fixed[fixed_idx]].sum())
        contrib = base_contrib[None, :] + self.cand_contrib[article]
        profit = base_profit + self.cand_profit[article]
        delta = np.minimum(0.0, contrib - self.rhs[None, :])
        values = (self.problem.profit_scale * profit
                  + delta @ self.problem.violation_scale)
        best = int(np.argmax(values))
        out = fixed.copy()
        out[article] = self.cand_k[article][best]
        return out


def solve_selection(problem: SelectionProblem,
                    node_limit: int = DEFAULT_NODE_LIMIT,
                    time_limit: float = DEFAULT_TIME_LIMIT,
                    gap_limit: float = 0.0) -> PrimalSolution:
    """Branch-and-bound over the selection problem.

    ``gap_limit`` is a relative optimality tolerance: nodes that cannot beat
    the incumbent by more than ``gap_limit * max(1, |incumbent|)`` are pruned,
    which collapses the exploration of near-ties. Zero keeps the search exact.
    """
    if node_limit <= 0 or time_limit <= 0:
        raise InputError("node and time limits must be positive")
    if gap_limit < 0:
        raise InputError("gap limit must be non-negative")
    pool = problem.pool
    n, j = pool.n_articles, pool.size
    deadline = time.perf_counter() + time_limit
    search = _Search(problem)

    # Incumbent: best pure pooled cut.
    pure_values = np.empty(j)
    for k in range(j):
        value, _ = _selection_objective(problem, float(pool.total_profit[k]),
                                        pool.cuts[k].total_contribution)
        pure_values[k] = value
    best_k = int(np.argmax(pure_values))
    incumbent = np.full(n, best_k, dtype=np.int64)
    inc_value, inc_profit, inc_contrib, inc_delta = _score_selection(problem, incumbent)

    prune_tol = 1e-11 * (1.0 + abs(inc_value))
    int_tol = 1e-9

    def consider(candidate: np.ndarray):
        nonlocal incumbent, inc_value, inc_profit, inc_contrib, inc_delta
        value, profit, contrib, delta = _score_selection(problem, candidate)
        if value > inc_value + prune_tol:
            incumbent, inc_value = candidate, value
            inc_profit, inc_contrib, inc_delta = profit, contrib, delta

    nodes = 0
    status = "optimal"
    root = np.full(n, -1, dtype=np.int64)
    stack: list[tuple[np.ndarray, float]] = [(root, np.inf)]

    while stack:
        if nodes >= node_limit:
            status = "node-limit"
            break
        if time.perf_counter() > deadline:
            status = "time-limit"
            break
        fixed, parent_bound = stack.pop()
        if parent_bound <= inc_value + prune_tol:
            continue
        open_idx = np.flatnonzero(fixed < 0)
        if open_idx.shape[0] == 0:
            consider(fixed)
            continue
        if open_idx.shape[0] == 1:
            consider(search.complete_single(fixed, int(open_idx[0])))
            continue
        nodes += 1
        lp, open_idx, offsets, fixed_profit = search.node_lp(fixed)
        res = simplex.solve(lp)
        if res.status is not SimplexStatus.OPTIMAL:
            # Relaxation is always feasible; a failed node keeps its parent bound.
            bound = parent_bound
            y = None
        else:
            bound = problem.profit_scale * fixed_profit - res.objective
            y = res.x
        if bound <= inc_value + prune_tol:
            continue
        if y is not None:
            frac = np.empty(open_idx.shape[0])
            rounded = fixed.copy()
            for a, i in enumerate(open_idx):
                block = y[offsets[a]:offsets[a + 1]]
                top = int(np.argmax(block))
                frac[a] = 1.0 - float(block[top])
                rounded[i] = search.cand_k[i][top]
            consider(rounded)
            if np.all(frac <= int_tol):
                continue  # LP already integral; rounding captured it
            if bound <= inc_value + prune_tol:
                continue
            branch_pos = int(np.argmax(frac))
        else:
            branch_pos = 0
        branch_article = int(open_idx[branch_pos])
        order = np.argsort(-search.cand_profit[branch_article], kind="stable")
        # Stack is LIFO: push in reverse so high-profit children pop first.
        for pos in order[::-1]:
            child = fixed.copy()
            child[branch_article] = search.cand_k[branch_article][pos]
            stack.append((child, bound))

    open_bounds = [b for _, b in stack if np.isfinite(b)] if status != "optimal" else []
    best_open = max(open_bounds, default=inc_value)
    proof_gap = max(0.0, best_open - inc_value) if status != "optimal" else 0.0

    violations = np.maximum(0.0, pool.rhs - inc_contrib)
    return PrimalSolution(selection=tuple(int(k) for k in incumbent),
                          offers=pool.offers_for_selection(incumbent),
                          objective=inc_value, profit=inc_profit,
                          delta=inc_delta, violations=violations,
                          proof_gap=proof_gap, status=status, nodes=nodes)
