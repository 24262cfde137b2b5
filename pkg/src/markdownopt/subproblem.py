"""Exact single-article solver and the relaxed assortment evaluation.

An article's feasible set is, per country, the set of non-decreasing discount
index paths over the horizon (markdowns only deepen). Demand responds to the
discount fraction d via ``base * seasonality(w) * exp(elasticity * d)``,
weekly sales are ``min(remaining stock, demand)`` and leftover stock at the
end of the horizon earns a salvage fraction of the base price. Countries
share no stock, so profit and constraint contributions are sums over
countries and the article optimum under any multiplier vector is the
composition of per-country argmaxes.

The relaxed assortment evaluation maximises, independently per article,
``profit + lam @ contributions`` and subtracts ``lam @ rhs`` once, which
upper-bounds the constrained optimum for every ``lam >= 0``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, InputError
from .model import Article, DiscountGrid, Instance, Offer, contribution_term

DEFAULT_PATH_CAP = 10**6
DEFAULT_PRODUCT_CAP = 10**7


@dataclass(frozen=True)
class ArticleEconomy:
    """Per (country, week, level) demand and per (country, level) price/margin."""

    demand: np.ndarray  # (C, T, D)
    price: np.ndarray   # (C, D)
    margin: np.ndarray  # (C, D)


@dataclass(frozen=True)
class CountryTable:
    """All feasible paths of one country with their cached evaluations."""

    country: int
    paths: np.ndarray             # (P, T) level indices, lexicographic order
    profit: np.ndarray            # (P,)
    contribution: np.ndarray      # (P, L)
    first_week_sales: np.ndarray  # (P,)
    first_week_price: np.ndarray  # (P,)


@dataclass(frozen=True)
class SubproblemResult:
    offer: Offer
    lagrangian_value: float


def path_count(weeks: int, levels: int) -> int:
    """Number of non-decreasing index paths of length ``weeks`` over ``levels``."""
    return math.comb(weeks + levels - 1, levels - 1)


def monotone_paths(weeks: int, levels: int, cap: int = DEFAULT_PATH_CAP) -> np.ndarray:
    count = path_count(weeks, levels)
    if count > cap:
        raise CapExceededError(
            f"path enumeration needs {count} paths per country, cap is {cap}")
    out = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations_with_replacement(range(levels), weeks)),
        dtype=np.int16, count=count * weeks)
    return out.reshape(count, weeks)


def build_economy(article: Article, grid: DiscountGrid) -> ArticleEconomy:
    levels = np.asarray(grid.levels, dtype=float)              # (D,)
    price_base = np.asarray(article.base_price, dtype=float)   # (C,)
    season = np.asarray(article.seasonality, dtype=float)      # (T,)
    base = np.asarray(article.base_demand, dtype=float)        # (C,)
    eps = np.asarray(article.elasticity, dtype=float)          # (C,)
    price = price_base[:, None] * (1.0 - levels[None, :])      # (C, D)
    margin = price - (article.unit_cost_fraction * price_base)[:, None]
    demand = (base[:, None, None] * season[None, :, None]
              * np.exp(eps[:, None, None] * levels[None, None, :]))
    return ArticleEconomy(demand=demand, price=price, margin=margin)


def country_tables(article: Article, grid: DiscountGrid, constraints,
                   path_cap: int = DEFAULT_PATH_CAP) -> list[CountryTable]:
    """Evaluate every feasible path of every country once.

    The sequential stock recursion is vectorised over paths; everything the
    optimizer needs later (profit, per-constraint contribution, first-week
    sales and price) is cached here so multiplier sweeps never re-simulate.
    """
    economy = build_economy(article, grid)
    paths = monotone_paths(article.horizon, grid.count, cap=path_cap)
    n_paths = paths.shape[0]
    tables = []
    for c in range(article.countries):
        stock = np.full(n_paths, article.initial_stock[c], dtype=float)
        profit = np.zeros(n_paths)
        first_sales = None
        for w in range(article.horizon):
            lvl = paths[:, w]
            sales = np.minimum(stock, economy.demand[c, w, lvl])
            profit += economy.margin[c, lvl] * sales
            stock = stock - sales
            if w == 0:
                first_sales = sales
        profit += article.salvage_fraction[c] * article.base_price[c] * stock
        first_price = economy.price[c, paths[:, 0]]
        contrib = np.zeros((n_paths, len(constraints)))
        for k, con in enumerate(constraints):
            contrib[:, k] = contribution_term(con, c, article.base_price[c],
                                              first_price, first_sales)
        tables.append(CountryTable(country=c, paths=paths, profit=profit,
                                   contribution=contrib,
                                   first_week_sales=first_sales,
                                   first_week_price=first_price))
    return tables


def _compose_offer(article: Article, tables: list[CountryTable], picks) -> Offer:
    n_constraints = tables[0].contribution.shape[1]
    profit = 0.0
    contrib = np.zeros(n_constraints)
    paths = []
    fw_sales = []
    fw_price = []
    for table, i in zip(tables, picks):
        profit += float(table.profit[i])
        contrib += table.contribution[i]
        paths.append(tuple(int(v) for v in table.paths[i]))
        fw_sales.append(float(table.first_week_sales[i]))
        fw_price.append(float(table.first_week_price[i]))
    return Offer(article_id=article.id,
                 discount_index=tuple(paths),
                 profit=profit,
                 contributions=tuple(float(v) for v in contrib),
                 first_week_sales=tuple(fw_sales),
                 first_week_price=tuple(fw_price),
                 base_price=article.base_price)


def enumerate_offers(article: Article, grid: DiscountGrid, constraints,
                     path_cap: int = DEFAULT_PATH_CAP,
                     product_cap: int = DEFAULT_PRODUCT_CAP) -> list[Offer]:
    """Materialise the article's full offer set (product over countries)."""
    tables = country_tables(article, grid, constraints, path_cap=path_cap)
    total = 1
    for t in tables:
        total *= t.paths.shape[0]
    if total > product_cap:
        raise CapExceededError(
            f"article {article.id} has {total} offers across countries, cap is {product_cap}")
    ranges = [range(t.paths.shape[0]) for t in tables]
    return [_compose_offer(article, tables, picks)
            for picks in itertools.product(*ranges)]


def _check_multipliers(lam, n_constraints: int) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (n_constraints,):
        raise InputError(f"expected {n_constraints} multipliers, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise InputError("multipliers must be finite")
    if np.any(lam < 0.0):
        raise InputError("multipliers must be non-negative")
    return lam


def _argmax_offer(article: Article, tables: list[CountryTable],
                  lam: np.ndarray) -> SubproblemResult:
    # First maximal index per country = lexicographically smallest tied path,
    # and the per-country composition is the joint lexicographic tie-break.
    picks = []
    for t in tables:
        score = t.profit + t.contribution @ lam
        picks.append(int(np.argmax(score)))
    offer = _compose_offer(article, tables, picks)
    value = offer.profit + float(np.dot(np.asarray(offer.contributions), lam))
    return SubproblemResult(offer=offer, lagrangian_value=value)


def solve_article(article: Article, grid: DiscountGrid, constraints, lam,
                  tables: list[CountryTable] | None = None,
                  path_cap: int = DEFAULT_PATH_CAP) -> SubproblemResult:
    """Maximise ``profit + lam @ contributions`` over the article's offers."""
    lam = _check_multipliers(lam, len(constraints))
    if tables is None:
        tables = country_tables(article, grid, constraints, path_cap=path_cap)
    return _argmax_offer(article, tables, lam)


class LagrangianSolver:
    """Caches per-article tables and evaluates the relaxation for many multipliers.

    ``evaluate`` fans out over articles (thread pool when ``threads > 1``) and
    reduces in fixed article order, so results are identical for every thread
    count.
    """

    def __init__(self, instance: Instance, path_cap: int = DEFAULT_PATH_CAP,
                 threads: int = 1):
        self.instance = instance
        self.threads = max(1, int(threads))
        self._tables = [
            country_tables(a, instance.grid, instance.constraints, path_cap=path_cap)
            for a in instance.articles
        ]
        self._rhs = instance.rhs
        self.solve_count = 0

    def solve_article(self, index: int, lam) -> SubproblemResult:
        lam = _check_multipliers(lam, self.instance.n_constraints)
        self.solve_count += 1
        return _argmax_offer(self.instance.articles[index], self._tables[index], lam)

    def max_abs_profit(self) -> float:
        """max_i max_x |profit| over the cached offer sets."""
        worst = 0.0
        for tables in self._tables:
            hi = sum(float(t.profit.max()) for t in tables)
            lo = sum(float(t.profit.min()) for t in tables)
            worst = max(worst, abs(hi), abs(lo))
        return worst

    def evaluate(self, lam) -> tuple[float, list[Offer]]:
        """value of the relaxation at ``lam`` plus the per-article maximizers."""
        lam = _check_multipliers(lam, self.instance.n_constraints)
        n = self.instance.n_articles
        indices = range(n)
        if self.threads > 1 and n > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(
                    lambda i: _argmax_offer(self.instance.articles[i],
                                            self._tables[i], lam), indices))
        else:
            results = [_argmax_offer(self.instance.articles[i], self._tables[i], lam)
                       for i in indices]
        self.solve_count += n
        value = 0.0
        for r in results:
            value += r.lagrangian_value
        value -= float(np.dot(lam, self._rhs))
        return value, [r.offer for r in results]


def evaluate_lr(instance: Instance, lam, threads: int = 1,
                solver: LagrangianSolver | None = None) -> tuple[float, list[Offer]]:
    if solver is None:
        solver = LagrangianSolver(instance, threads=threads)
    return solver.evaluate(lam)
