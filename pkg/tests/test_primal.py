from __future__ import annotations

import itertools

import numpy as np
import pytest

from markdownopt import gen, master, primal
from markdownopt.errors import InputError

from conftest import exact_pool, synthetic_pool


def brute_force_best(problem):
    pool = problem.pool
    best = -np.inf
    for sel in itertools.product(range(pool.size), repeat=pool.n_articles):
        value, *_ = primal._score_selection(problem, np.asarray(sel))
        best = max(best, value)
    return best


def test_build_selection_scalings(rng):
    pool = master.CutPool(rhs=[0.0], lambda_bar=5.0, n_articles=1)
    pool.add_values_cut([10.0], [[1.0]], master.ORIGIN_EXACT)
    pool.add_values_cut([20.0], [[4.0]], master.ORIGIN_EXACT)
    pool.add_values_cut([15.0], [[2.0]], master.ORIGIN_EXACT)
    problem = primal.build_selection(pool)
    assert problem.profit_scale == pytest.approx(1.0 / 20.0)
    assert problem.violation_scale == pytest.approx([1.0 / 3.0])


def test_build_selection_degenerate_guards():
    pool = master.CutPool(rhs=[1.0], lambda_bar=5.0, n_articles=1)
    pool.add_values_cut([-5.0], [[2.0]], master.ORIGIN_EXACT)
    pool.add_values_cut([-7.0], [[2.0]], master.ORIGIN_EXACT)
    problem = primal.build_selection(pool)
    assert problem.profit_scale == 1.0   # best profit not positive
    assert problem.violation_scale == pytest.approx([1.0])  # zero residual range
    with pytest.raises(InputError):
        primal.build_selection(master.CutPool(rhs=[0.0], lambda_bar=1.0, n_articles=1))


def test_single_article_selection(rng):
    pool = synthetic_pool(rng, n_articles=1, n_cuts=5, n_constraints=2)
    problem = primal.build_selection(pool)
    sol = primal.solve_selection(problem)
    assert sol.status == "optimal"
    assert sol.proof_gap == 0.0
    assert sol.objective == pytest.approx(brute_force_best(problem), rel=1e-12)


def test_two_by_two_exhaustive(rng):
    pool = synthetic_pool(rng, n_articles=2, n_cuts=2, n_constraints=2)
    problem = primal.build_selection(pool)
    sol = primal.solve_selection(problem)
    assert sol.objective == pytest.approx(brute_force_best(problem), rel=1e-12)


def test_seeded_pools_match_exhaustive_enumeration(rng):
    for trial in range(15):
        n = int(rng.integers(2, 5))
        j = int(rng.integers(2, 6))
        pool = synthetic_pool(rng, n_articles=n, n_cuts=j, n_constraints=2)
        problem = primal.build_selection(pool)
        sol = primal.solve_selection(problem)
        best = brute_force_best(problem)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best, rel=1e-9, abs=1e-9)


def test_delta_consistency_and_incumbent_floor(rng):
    pool = synthetic_pool(rng, n_articles=5, n_cuts=6, n_constraints=3)
    problem = primal.build_selection(pool)
    sol = primal.solve_selection(problem)
    idx = np.arange(5)
    sel = np.asarray(sol.selection)
    contrib = pool.article_contribution[idx, sel, :].sum(axis=0)
    assert sol.delta == pytest.approx(np.minimum(0.0, contrib - pool.rhs), abs=0.0)
    assert sol.violations == pytest.approx(np.maximum(0.0, pool.rhs - contrib))
    for k in range(pool.size):
        value, _ = primal._selection_objective(
            problem, float(pool.total_profit[k]), pool.cuts[k].total_contribution)
        assert sol.objective >= value - 1e-12


def test_reevaluation_reproduces_caches(small_hard_instance):
    pool = exact_pool(small_hard_instance, outer=4)
    problem = primal.build_selection(pool)
    sol = primal.solve_selection(problem)
    assert sol.offers is not None
    profit = np.array([o.profit for o in sol.offers]).sum()
    assert profit == sol.profit  # cache composition is exact, not approximate
    contrib = np.sum([np.asarray(o.contributions) for o in sol.offers], axis=0)
    sel = np.asarray(sol.selection)
    idx = np.arange(pool.n_articles)
    assert np.array_equal(contrib,
                          pool.article_contribution[idx, sel, :].sum(axis=0))


def test_node_limit_reports_gap(rng):
    pool = synthetic_pool(rng, n_articles=8, n_cuts=6, n_constraints=3)
    problem = primal.build_selection(pool)
    sol = primal.solve_selection(problem, node_limit=1)
    assert sol.status == "node-limit"
    assert sol.proof_gap >= 0.0
    full = primal.solve_selection(problem)
    assert full.objective >= sol.objective - 1e-12
    with pytest.raises(InputError):
        primal.solve_selection(problem, node_limit=0)
