from __future__ import annotations

import numpy as np
import pytest

from markdownopt import heuristics, master
from markdownopt.heuristics import CutRng

from conftest import synthetic_pool


def test_rng_golden_stream():
    rng = CutRng(42)
    assert rng.draws(5, 3).tolist() == [0, 2, 1, 1, 1]
    assert rng.draws(5, 3).tolist() == [1, 2, 1, 0, 2]
    assert CutRng(42).draws(5, 3).tolist() == [0, 2, 1, 1, 1]


def test_rng_uniform_marginals():
    rng = CutRng(7)
    counts = np.zeros(4)
    draws = 10_000
    for _ in range(draws // 5):
        for v in rng.draws(5, 4):
            counts[v] += 1
    p = 0.25
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) < 3 * sigma)


def test_random_cut_single_cut_pool(rng):
    pool = synthetic_pool(rng, n_articles=4, n_cuts=1, n_constraints=2)
    out = heuristics.random_cut(pool, CutRng(0), np.zeros(2), mu=0.0)
    assert out.selection == (0, 0, 0, 0)
    assert out.total_profit == pytest.approx(float(pool.total_profit[0]))


def test_max_violation_at_zero_multipliers_picks_best_profit(rng):
    pool = synthetic_pool(rng, n_articles=5, n_cuts=4, n_constraints=2)
    out = heuristics.max_violation_cut(pool, np.zeros(2), mu=0.0)
    expect = tuple(int(k) for k in np.argmax(pool.article_profit, axis=1))
    assert out.selection == expect


def test_max_violation_single_cut(rng):
    pool = synthetic_pool(rng, n_articles=3, n_cuts=1, n_constraints=1)
    out = heuristics.max_violation_cut(pool, np.array([1.0]), mu=0.0)
    assert out.selection == (0, 0, 0)


def test_max_violation_dominates_pure_cuts_and_random(rng):
    pool = synthetic_pool(rng, n_articles=6, n_cuts=5, n_constraints=3)
    lam = rng.uniform(0.0, 4.0, size=3)
    mv = heuristics.max_violation_cut(pool, lam, mu=0.0)
    assert mv.lr_value >= pool.values_at(lam).max() - 1e-9
    for seed in range(5):
        rc = heuristics.random_cut(pool, CutRng(seed), lam, mu=0.0)
        assert mv.lr_value >= rc.lr_value - 1e-9


def test_max_violation_tie_breaks_to_smallest_index(rng):
    pool = synthetic_pool(rng, n_articles=2, n_cuts=2, n_constraints=1)
    dup = pool.copy()
    dup.add_selection_cut([0, 0], master.ORIGIN_MAXVIOL)  # column 2 == column 0
    lam = np.array([0.5])
    base = heuristics.max_violation_cut(pool, lam, mu=0.0)
    out = heuristics.max_violation_cut(dup, lam, mu=0.0)
    assert out.selection == base.selection  # never picks the duplicate column


def test_outcome_scoring_matches_tables(rng):
    pool = synthetic_pool(rng, n_articles=4, n_cuts=3, n_constraints=2)
    lam = np.array([1.0, 2.0])
    mu = 10.0
    out = heuristics.outcome_from_selection(pool, [1, 0, 2, 1],
                                            master.ORIGIN_RANDOM, lam, mu)
    idx = np.arange(4)
    sel = np.array([1, 0, 2, 1])
    profit = float(pool.article_profit[idx, sel].sum())
    contrib = pool.article_contribution[idx, sel, :].sum(axis=0)
    lr = profit + float(np.dot(contrib - pool.rhs, lam))
    assert out.total_profit == pytest.approx(profit)
    assert out.lr_value == pytest.approx(lr)
    assert out.violation == pytest.approx(lr - mu)
    assert out.efficacy == pytest.approx((lr - mu) / np.linalg.norm(lam))


def test_efficacy_conventions():
    assert heuristics.efficacy_value(np.array([3.0, 4.0]), 5.0, 5.0) == 0.0
    # numerator 2, norm 2: exactly the default gate threshold
    assert heuristics.efficacy_value(np.array([2.0, 0.0]), 1.0, 3.0) == pytest.approx(1.0)
    assert heuristics.efficacy_value(np.zeros(2), 1.0, 2.0) == np.inf
    assert heuristics.efficacy_value(np.zeros(2), 1.0, 0.5) == 0.0


def test_feasibility_cut_returns_best_selection(rng):
    pool = synthetic_pool(rng, n_articles=3, n_cuts=3, n_constraints=2,
                          rhs=np.array([-100.0, -100.0]))
    # every cut satisfies the rows, so the best pure profit combination wins
    out = heuristics.feasibility_cut(pool, np.zeros(2), mu=0.0)
    expect = tuple(int(k) for k in np.argmax(pool.article_profit, axis=1))
    assert out.selection == expect
    assert out.origin == master.ORIGIN_FEASIBILITY


def test_feasibility_cut_single_cut_pool(rng):
    pool = synthetic_pool(rng, n_articles=4, n_cuts=1, n_constraints=1)
    out = heuristics.feasibility_cut(pool, np.array([0.0]), mu=0.0)
    assert out.selection == (0, 0, 0, 0)


def test_heuristic_cut_keeps_bound_sandwich(rng):
    # adding any combination cut never pushes the bound above the best pure value
    for trial in range(10):
        pool = synthetic_pool(rng, n_articles=4, n_cuts=4, n_constraints=2)
        sol = master.solve_aggregated(pool)
        out = heuristics.max_violation_cut(pool, sol.lam, sol.mu)
        pool.add_selection_cut(out.selection, master.ORIGIN_MAXVIOL)
        sol2 = master.solve_aggregated(pool)
        assert pool.values_at(sol2.lam).max() <= sol2.mu + 1e-7 * max(1.0, abs(sol2.mu))
        assert sol2.mu >= sol.mu - 1e-9 * max(1.0, abs(sol.mu))
