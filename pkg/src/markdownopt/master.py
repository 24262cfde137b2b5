"""Cut pool and the multiplier-problem master LPs.

Every evaluated assortment solution X^k becomes a cut. With the canonical
``>=`` constraint sense the relaxed value of a solution at multipliers lam is

    value_k(lam) = profit(X^k) + lam @ (A X^k - rhs)

and the aggregated master is  min mu  s.t.  mu >= value_k(lam) for all k,
0 <= lam <= lambda_bar. Its optimum lower-bounds the best achievable
relaxation value; the multipliers at the optimum drive the next separation
round.

The disaggregated variant keeps one epigraph variable per article
(``nu_i >= profit_i(X^k_i) + lam @ contrib_i(X^k_i)``) and minimizes
``sum nu - lam @ rhs``; partial aggregation groups articles and interpolates
between the two. All three report the bound in the aggregated normalization
so they are directly comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import CapExceededError, InputError, NumericalError
from .model import Offer
from .simplex import DenseLP, SimplexResult, SimplexStatus

POOL_FORMAT_VERSION = 1
DEFAULT_ROW_CAP = 50_000

ORIGIN_EXACT = "exact-lr"
ORIGIN_RANDOM = "heuristic-random"
ORIGIN_MAXVIOL = "heuristic-maxviol"
ORIGIN_FEASIBILITY = "heuristic-feasibility"
ORIGINS = (ORIGIN_EXACT, ORIGIN_RANDOM, ORIGIN_MAXVIOL, ORIGIN_FEASIBILITY)

FEASIBILITY_TOL = 1e-7


def simplex_solve(lp: DenseLP, **kwargs) -> SimplexResult:
    """The shared dense bounded-variable simplex (see :mod:`markdownopt.simplex`)."""
    return simplex.solve(lp, **kwargs)


@dataclass(frozen=True)
class Cut:
    index: int
    origin: str
    total_profit: float
    total_contribution: np.ndarray
    offers: tuple[Offer, ...] | None
    duplicate: bool


@dataclass(frozen=True)
class MasterSolution:
    """Bound and multipliers from one master solve.

    ``mu`` is always the bound in the aggregated normalization; for grouped
    formulations ``nu`` carries the per-group epigraph values and
    ``objective_value`` equals ``mu``.
    """

    mu: float
    lam: np.ndarray
    objective_value: float
    active_cut_indices: tuple[int, ...]
    status: str
    nu: np.ndarray | None = None
    iterations: int = 0


class CutPool:
    """The evaluated solutions X^1..X^j and their per-article value tables.

    Single-writer: only the driving loop appends. Snapshots may be read
    concurrently. Duplicate cuts are appended but flagged, so iteration
    indices stay aligned with the trace.
    """

    def __init__(self, rhs, lambda_bar: float, n_articles: int):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        if n_articles < 1:
            raise InputError("cut pool needs at least one article")
        if not (lambda_bar > 0.0 and np.isfinite(lambda_bar)):
            raise InputError("lambda_bar must be positive and finite")
        self.rhs = rhs
        self.lambda_bar = float(lambda_bar)
        self.n_articles = int(n_articles)
        self.n_constraints = rhs.shape[0]
        self.cuts: list[Cut] = []
        cap = 16
        self._profit = np.zeros((self.n_articles, cap))
        self._contrib = np.zeros((self.n_articles, cap, self.n_constraints))
        self._keys: set[bytes] = set()

    @property
    def size(self) -> int:
        return len(self.cuts)

    @property
    def article_profit(self) -> np.ndarray:
        """(n, j) view: profit of article i under cut k."""
        return self._profit[:, :self.size]

    @property
    def article_contribution(self) -> np.ndarray:
        """(n, j, L) view: contribution vector of article i under cut k."""
        return self._contrib[:, :self.size, :]

    @property
    def total_profit(self) -> np.ndarray:
        return np.array([c.total_profit for c in self.cuts])

    @property
    def total_contribution(self) -> np.ndarray:
        if not self.cuts:
            return np.zeros((0, self.n_constraints))
        return np.stack([c.total_contribution for c in self.cuts])

    @property
    def max_total_profit(self) -> float:
        return float(self.total_profit.max())

    def residuals(self) -> np.ndarray:
        """(j, L) of (A X^k - rhs); negative entries are violations."""
        return self.total_contribution - self.rhs[None, :]

    @property
    def residual_max(self) -> np.ndarray:
        return self.residuals().max(axis=0)

    @property
    def residual_min(self) -> np.ndarray:
        return self.residuals().min(axis=0)

    def values_at(self, lam) -> np.ndarray:
        """(j,) relaxed value of every pooled solution at multipliers ``lam``."""
        lam = np.asarray(lam, dtype=float)
        return self.total_profit + self.residuals() @ lam

    def _grow(self):
        cap = self._profit.shape[1]
        if self.size < cap:
            return
        new_cap = cap * 2
        profit = np.zeros((self.n_articles, new_cap))
        profit[:, :cap] = self._profit
        contrib = np.zeros((self.n_articles, new_cap, self.n_constraints))
        contrib[:, :cap, :] = self._contrib
        self._profit = profit
        self._contrib = contrib

    def _append(self, profits: np.ndarray, contribs: np.ndarray, origin: str,
                offers: tuple[Offer, ...] | None) -> Cut:
        if origin not in ORIGINS:
            raise InputError(f"unknown cut origin {origin!r}")
        self._grow()
        k = self.size
        self._profit[:, k] = profits
        self._contrib[:, k, :] = contribs
        key = profits.tobytes() + contribs.tobytes()
        duplicate = key in self._keys
        self._keys.add(key)
        cut = Cut(index=k, origin=origin,
                  total_profit=float(profits.sum()),
                  total_contribution=contribs.sum(axis=0),
                  offers=offers, duplicate=duplicate)
        self.cuts.append(cut)
        return cut

    def add_cut(self, offers, origin: str) -> Cut:
        """Append the solution described by one offer per article."""
        if len(offers) != self.n_articles:
            raise InputError(f"expected {self.n_articles} offers, got {len(offers)}")
        profits = np.array([o.profit for o in offers], dtype=float)
        contribs = np.zeros((self.n_articles, self.n_constraints))
        for i, offer in enumerate(offers):
            if len(offer.contributions) != self.n_constraints:
                raise InputError("offer contribution cache does not match pool width")
            contribs[i, :] = offer.contributions
        return self._append(profits, contribs, origin, tuple(offers))

    def add_selection_cut(self, selection, origin: str) -> Cut:
        """Append a combination of pooled solutions: article i takes cut selection[i]."""
        selection = np.asarray(selection, dtype=np.int64)
        if selection.shape != (self.n_articles,):
            raise InputError("selection needs one pooled cut index per article")
        if self.size == 0 or selection.min() < 0 or selection.max() >= self.size:
            raise InputError("selection references cuts outside the pool")
        idx = np.arange(self.n_articles)
        profits = self.article_profit[idx, selection].copy()
        contribs = self.article_contribution[idx, selection, :].copy()
        offers = None
        if all(c.offers is not None for c in self.cuts):
            offers = tuple(self.cuts[k].offers[i] for i, k in enumerate(selection))
        return self._append(profits, contribs, origin, offers)

    def add_values_cut(self, profits, contribs, origin: str) -> Cut:
        """Append a cut from raw per-article values (pool replay, synthetic tests)."""
        profits = np.asarray(profits, dtype=float)
        contribs = np.asarray(contribs, dtype=float).reshape(
            self.n_articles, self.n_constraints)
        if profits.shape != (self.n_articles,):
            raise InputError("profits must have one entry per article")
        return self._append(profits.copy(), contribs.copy(), origin, None)

    def offers_for_selection(self, selection) -> tuple[Offer, ...] | None:
        if not all(c.offers is not None for c in self.cuts):
            return None
        return tuple(self.cuts[int(k)].offers[i] for i, k in enumerate(selection))

    def copy(self) -> "CutPool":
        other = CutPool(self.rhs.copy(), self.lambda_bar, self.n_articles)
        other._profit = self._profit.copy()
        other._contrib = self._contrib.copy()
        other._keys = set(self._keys)
        other.cuts = list(self.cuts)
        return other


# ---------------------------------------------------------------------------
# Master formulations
# ---------------------------------------------------------------------------

def aggregated_lp(pool: CutPool, lambda_bar: float | None = None) -> DenseLP:
    """One epigraph variable mu plus the multiplier box; one row per cut."""
    if pool.size == 0:
        raise InputError("master needs at least one cut")
    lam_bar = pool.lambda_bar if lambda_bar is None else float(lambda_bar)
    j, n_lam = pool.size, pool.n_constraints
    n_vars = 1 + n_lam
    rows = np.empty((j, n_vars))
    rows[:, 0] = 1.0
    rows[:, 1:] = -pool.residuals()
    rhs = pool.total_profit
    lower = np.concatenate([[-np.inf], np.zeros(n_lam)])
    upper = np.concatenate([[np.inf], np.full(n_lam, lam_bar)])
    lp = DenseLP(c=np.concatenate([[1.0], np.zeros(n_lam)]),
                 rows=rows, senses=(simplex.GE,) * j, rhs=rhs,
                 lower=lower, upper=upper,
                 free_start={0: float(rhs.max())})
    assert lp.n_vars == n_lam + 1 and lp.n_rows == j
    return lp


def grouped_lp(pool: CutPool, groups: list[np.ndarray],
               lambda_bar: float | None = None) -> DenseLP:
    """One epigraph variable per article group; objective sum(nu) - lam @ rhs."""
    if pool.size == 0:
        raise InputError("master needs at least one cut")
    lam_bar = pool.lambda_bar if lambda_bar is None else float(lambda_bar)
    j, n_lam, n_groups = pool.size, pool.n_constraints, len(groups)
    profit_g = np.empty((n_groups, j))
    contrib_g = np.empty((n_groups, j, n_lam))
    for g, members in enumerate(groups):
        profit_g[g] = pool.article_profit[members].sum(axis=0)
        contrib_g[g] = pool.article_contribution[members].sum(axis=0)
    n_vars = n_groups + n_lam
    rows = np.zeros((n_groups * j, n_vars))
    rhs = np.empty(n_groups * j)
    for g in range(n_groups):
        sl = slice(g * j, (g + 1) * j)
        rows[sl, g] = 1.0
        rows[sl, n_groups:] = -contrib_g[g]
        rhs[sl] = profit_g[g]
    lower = np.concatenate([np.full(n_groups, -np.inf), np.zeros(n_lam)])
    upper = np.concatenate([np.full(n_groups, np.inf), np.full(n_lam, lam_bar)])
    c = np.concatenate([np.ones(n_groups), -pool.rhs])
    free_start = {g: float(profit_g[g].max()) for g in range(n_groups)}
    return DenseLP(c=c, rows=rows, senses=(simplex.GE,) * (n_groups * j), rhs=rhs,
                   lower=lower, upper=upper, free_start=free_start)


def partition_articles(n_articles: int, group_count: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle into ``group_count`` near-equal groups, fixed per run."""
    if not (1 <= group_count <= n_articles):
        raise InputError("group count must lie in [1, n_articles]")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed) & (2**64 - 1), 0x9a7)))
    perm = rng.permutation(n_articles)
    return [np.sort(chunk) for chunk in np.array_split(perm, group_count)]


def _check_cut_feasibility(pool: CutPool, mu: float, lam: np.ndarray):
    values = pool.values_at(lam)
    tol = FEASIBILITY_TOL * max(1.0, abs(mu))
    worst = float(values.max() - mu)
    if worst > tol:
        raise NumericalError(
            f"master solution violates a pooled cut by {worst:.3e} (tol {tol:.3e})")


def _active_cuts(pool: CutPool, mu: float, lam: np.ndarray) -> tuple[int, ...]:
    values = pool.values_at(lam)
    tol = FEASIBILITY_TOL * max(1.0, abs(mu))
    return tuple(int(k) for k in np.flatnonzero(values >= mu - tol))


def _status_label(status: SimplexStatus) -> str:
    if status is SimplexStatus.OPTIMAL:
        return "optimal"
    if status is SimplexStatus.INFEASIBLE:
        return "infeasible-detected"
    if status is SimplexStatus.ITERATION_LIMIT:
        return "iteration-limit"
    return status.value


def solve_aggregated(pool: CutPool, lambda_bar: float | None = None) -> MasterSolution:
    lp = aggregated_lp(pool, lambda_bar)
    res = simplex.solve(lp)
    if res.status is not SimplexStatus.OPTIMAL:
        raise NumericalError(f"aggregated master: simplex {res.status.value}: {res.message}")
    mu = float(res.x[0])
    lam = res.x[1:].copy()
    _check_cut_feasibility(pool, mu, lam)
    return MasterSolution(mu=mu, lam=lam, objective_value=mu,
                          active_cut_indices=_active_cuts(pool, mu, lam),
                          status=_status_label(res.status), iterations=res.iterations)


def _solve_grouped(pool: CutPool, groups: list[np.ndarray],
                   lambda_bar: float | None, row_cap: int | None) -> MasterSolution:
    if row_cap is None:
        row_cap = DEFAULT_ROW_CAP
    n_rows = len(groups) * pool.size
    if n_rows > row_cap:
        raise CapExceededError(
            f"grouped master needs {n_rows} rows, cap is {row_cap}; "
            f"use fewer groups or raise the cap")
    lp = grouped_lp(pool, groups, lambda_bar)
    res = simplex.solve(lp)
    if res.status is not SimplexStatus.OPTIMAL:
        raise NumericalError(f"grouped master: simplex {res.status.value}: {res.message}")
    n_groups = len(groups)
    nu = res.x[:n_groups].copy()
    lam = res.x[n_groups:].copy()
    mu = float(nu.sum() - np.dot(pool.rhs, lam))
    _check_cut_feasibility(pool, mu, lam)
    return MasterSolution(mu=mu, lam=lam, objective_value=mu,
                          active_cut_indices=_active_cuts(pool, mu, lam),
                          status=_status_label(res.status), nu=nu,
                          iterations=res.iterations)


def solve_disaggregated(pool: CutPool, lambda_bar: float | None = None,
                        row_cap: int | None = None) -> MasterSolution:
    groups = [np.array([i]) for i in range(pool.n_articles)]
    return _solve_grouped(pool, groups, lambda_bar, row_cap)


def solve_partially_aggregated(pool: CutPool, group_count: int | None = None,
                               seed: int = 0, groups: list | None = None,
                               lambda_bar: float | None = None,
                               row_cap: int | None = None) -> MasterSolution:
    if groups is None:
        if group_count is None:
            raise InputError("pass either group_count or explicit groups")
        groups = partition_articles(pool.n_articles, group_count, seed)
    else:
        groups = [np.asarray(g, dtype=np.int64) for g in groups]
        seen = np.concatenate(groups) if groups else np.array([], dtype=np.int64)
        if sorted(seen.tolist()) != list(range(pool.n_articles)):
            raise InputError("groups must partition the articles")
    return _solve_grouped(pool, groups, lambda_bar, row_cap)


# ---------------------------------------------------------------------------
# Pool dump format (JSON) for frozen-pool benchmarking
# ---------------------------------------------------------------------------

def pool_to_dict(pool: CutPool) -> dict:
    return {
        "format": POOL_FORMAT_VERSION,
        "articles": pool.n_articles,
        "constraints": pool.n_constraints,
        "lambda_bar": pool.lambda_bar,
        "rhs": pool.rhs.tolist(),
        "cuts": [
            {"origin": c.origin, "duplicate": c.duplicate,
             "total_profit": c.total_profit,
             "total_contribution": c.total_contribution.tolist()}
            for c in pool.cuts
        ],
        "article_profit": pool.article_profit.tolist(),
        "article_contribution": pool.article_contribution.tolist(),
    }


def pool_from_dict(d: dict) -> CutPool:
    if d.get("format") != POOL_FORMAT_VERSION:
        raise InputError(f"unsupported pool format {d.get('format')!r}")
    try:
        pool = CutPool(rhs=np.asarray(d["rhs"], dtype=float),
                       lambda_bar=d["lambda_bar"], n_articles=int(d["articles"]))
        profit = np.asarray(d["article_profit"], dtype=float)
        contrib = np.asarray(d["article_contribution"], dtype=float)
        for k, cut in enumerate(d["cuts"]):
            pool.add_values_cut(profit[:, k], contrib[:, k, :], cut["origin"])
    except (KeyError, TypeError, IndexError) as exc:
        raise InputError(f"malformed pool document: {exc}") from exc
    return pool


def save_pool(pool: CutPool, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pool_to_dict(pool), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_pool(path) -> CutPool:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"not valid JSON: {path}") from exc
    return pool_from_dict(payload)
