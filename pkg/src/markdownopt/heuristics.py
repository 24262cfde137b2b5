"""Heuristic cut generators over the pool, and the efficacy gate.

Each generator assembles a new assortment solution per-article from already
evaluated ones, so its relaxed value at any multipliers is available from the
pool's value tables without re-solving a single article. The cut is valid by
construction; whether it is useful is measured by its efficacy

    e = (value(lam, X_new) - mu) / ||lam||_2

i.e. how deeply it separates the master solution (mu, lam) it was generated
at, normalized by the multiplier norm. With lam = 0 the convention is +inf
for a violated cut and 0 otherwise, so the gate never blocks the first round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .master import (ORIGIN_FEASIBILITY, ORIGIN_MAXVIOL, ORIGIN_RANDOM, CutPool)
from .primal import build_selection, solve_selection


class CutRng:
    """Seeded stream for the random generator.

    Round ``t`` draws from a fresh PCG64 seeded with ``SeedSequence((seed, t))``;
    article ``i`` consumes the i-th variate of its round. This keeps draws
    reproducible across platforms and independent of call interleaving.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & (2**64 - 1)
        self.round = 0

    def draws(self, count: int, high: int) -> np.ndarray:
        gen = np.random.default_rng(np.random.SeedSequence((self.seed, self.round)))
        self.round += 1
        return gen.integers(0, high, size=count)


@dataclass(frozen=True)
class HeuristicOutcome:
    """A candidate cut assembled from pooled solutions."""

    origin: str
    selection: tuple[int, ...]
    total_profit: float
    total_contribution: np.ndarray
    lr_value: float
    violation: float
    efficacy: float


def efficacy_value(lam, mu: float, lr_value: float) -> float:
    num = lr_value - mu
    norm = float(np.linalg.norm(np.asarray(lam, dtype=float)))
    if norm == 0.0:
        return np.inf if num > 0.0 else 0.0
    return num / norm


def efficacy(lam, mu: float, outcome: HeuristicOutcome) -> float:
    """Cut depth of ``outcome`` against the master solution (mu, lam)."""
    return efficacy_value(lam, mu, outcome.lr_value)


def outcome_from_selection(pool: CutPool, selection, origin: str, lam,
                           mu: float) -> HeuristicOutcome:
    selection = np.asarray(selection, dtype=np.int64)
    if pool.size == 0:
        raise InputError("heuristics need a non-empty pool")
    lam = np.asarray(lam, dtype=float)
    idx = np.arange(pool.n_articles)
    profit = float(pool.article_profit[idx, selection].sum())
    contrib = pool.article_contribution[idx, selection, :].sum(axis=0)
    lr_value = profit + float(np.dot(contrib - pool.rhs, lam))
    violation = lr_value - mu
    return HeuristicOutcome(origin=origin,
                            selection=tuple(int(k) for k in selection),
                            total_profit=profit, total_contribution=contrib,
                            lr_value=lr_value, violation=violation,
                            efficacy=efficacy_value(lam, mu, lr_value))


def random_cut(pool: CutPool, rng: CutRng, lam, mu: float) -> HeuristicOutcome:
    """Per article, a uniform independent pick among pooled solutions."""
    selection = rng.draws(pool.n_articles, pool.size)
    return outcome_from_selection(pool, selection, ORIGIN_RANDOM, lam, mu)


def max_violation_cut(pool: CutPool, lam, mu: float) -> HeuristicOutcome:
    """Per article, the pooled solution maximizing profit + lam @ contribution.

    Works entirely off the value tables in O(n * j * L); ties resolve to the
    smallest cut index. The result dominates every single pooled cut at lam.
    """
    lam = np.asarray(lam, dtype=float)
    scores = pool.article_profit + pool.article_contribution @ lam  # (n, j)
    selection = np.argmax(scores, axis=1)
    return outcome_from_selection(pool, selection, ORIGIN_MAXVIOL, lam, mu)


def feasibility_cut(pool: CutPool, lam, mu: float, node_limit: int = 50_000,
                    time_limit: float = 30.0) -> HeuristicOutcome | None:
    """Run the primal selection step and offer its solution as a cut.

    Returns None when the selection search hits its limits before proving
    optimality (no cut in that case). Not useful twice in a row on an
    unchanged pool: the selection problem ignores the multipliers, so the
    driving loop must not repeat it without a pool change in between.
    """
    problem = build_selection(pool)
    result = solve_selection(problem, node_limit=node_limit, time_limit=time_limit)
    if result.status != "optimal":
        return None
    return outcome_from_selection(pool, result.selection, ORIGIN_FEASIBILITY, lam, mu)
