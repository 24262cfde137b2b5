"""Seeded synthetic instances and brute-force verification oracles.

Instances are deterministic functions of the generation spec (including its
seed). Difficulty presets steer the tension between profit-maximizing offers
and the per-country sales-weighted discount-rate band:

* ``easy``        - targets bracket the unconstrained optimum, multipliers
                    barely activate.
* ``hard``        - lower targets sit well above the natural discount rate of
                    profit maximizers, forcing sustained multiplier pressure
                    in most countries.
* ``infeasible-link`` - country 0 gets an unattainable lower target (above
                    the deepest grid discount), pinning its multiplier at the
                    box bound for the whole run. Constraint ids are laid out
                    as [lower_0, upper_0, lower_1, upper_1, ...], so the
                    unattainable row is always id 0.

The oracles are exponential-time reference solvers used only by tests and the
acceptance suite: full Cartesian enumeration for the pricing problem, and
vertex enumeration for small master LPs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, InputError
from .master import CutPool, aggregated_lp, grouped_lp, partition_articles
from .model import (Article, DiscountGrid, Instance, Offer, RawConstraint,
                    SDR_LOWER, SDR_UPPER, canonicalize)
from .simplex import DenseLP, EQ, GE, LE
from .subproblem import (DEFAULT_PATH_CAP, country_tables, enumerate_offers,
                         path_count, solve_article)

PRESETS = ("easy", "hard", "infeasible-link")
DEFAULT_ORACLE_CAP = 10**7

_GEN_STREAM = 0x6d61726b


@dataclass(frozen=True)
class GenSpec:
    articles: int
    countries: int = 1
    weeks: int = 3
    levels: int = 3
    preset: str = "easy"
    seed: int = 0
    max_discount: float = 0.6
    price_range: tuple[float, float] = (20.0, 120.0)
    demand_range: tuple[float, float] = (4.0, 40.0)
    stock_weeks_range: tuple[float, float] = (0.8, 2.5)
    elasticity_range: tuple[float, float] = (0.5, 3.5)
    salvage_range: tuple[float, float] = (0.05, 0.3)
    unit_cost_range: tuple[float, float] = (0.25, 0.6)
    seasonality_range: tuple[float, float] = (0.7, 1.3)
    sdr_band: tuple[float, float] | None = None
    lambda_bar: float | None = None
    path_cap: int = DEFAULT_PATH_CAP

    def __post_init__(self):
        if self.articles < 1 or self.countries < 1 or self.weeks < 1 or self.levels < 1:
            raise InputError("articles, countries, weeks and levels must be >= 1")
        if self.preset not in PRESETS:
            raise InputError(f"unknown preset {self.preset!r}; pick one of {PRESETS}")
        if not (0.0 < self.max_discount <= 0.9) and self.levels > 1:
            raise InputError("max_discount must lie in (0, 0.9]")
        for name in ("price_range", "demand_range", "stock_weeks_range",
                     "elasticity_range", "salvage_range", "unit_cost_range",
                     "seasonality_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0.0 <= lo <= hi):
                raise InputError(f"{name} must be a finite non-negative range")
        if self.sdr_band is not None:
            lo, hi = self.sdr_band
            if not (0.0 <= lo <= hi < 1.0):
                raise InputError("sdr_band must satisfy 0 <= lo <= hi < 1")


def spec_from_dict(d: dict) -> GenSpec:
    kwargs = dict(d)
    for name in ("price_range", "demand_range", "stock_weeks_range",
                 "elasticity_range", "salvage_range", "unit_cost_range",
                 "seasonality_range", "sdr_band"):
        if name in kwargs and kwargs[name] is not None:
            kwargs[name] = tuple(kwargs[name])
    try:
        return GenSpec(**kwargs)
    except TypeError as exc:
        raise InputError(f"malformed generation spec: {exc}") from exc


def load_spec(path) -> GenSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"not valid JSON: {path}") from exc
    return spec_from_dict(payload)


def _natural_sdr(articles, grid) -> np.ndarray:
    """Per-country sDR of the unconstrained profit maximizers."""
    c_count = articles[0].countries
    num = np.zeros(c_count)
    den = np.zeros(c_count)
    for art in articles:
        best = solve_article(art, grid, (), np.zeros(0))
        offer = best.offer
        for c in range(c_count):
            p, x, s = offer.base_price[c], offer.first_week_price[c], offer.first_week_sales[c]
            num[c] += (p - x) * s
            den[c] += p * s
    return np.where(den > 0.0, num / np.maximum(den, 1e-300), 0.0)


def _default_lambda_bar(articles, grid, rhs_values) -> float:
    """10 x worst article profit magnitude over the smallest positive |rhs|."""
    worst = 1.0
    for art in articles:
        tables = country_tables(art, grid, ())
        hi = sum(float(t.profit.max()) for t in tables)
        lo = sum(float(t.profit.min()) for t in tables)
        worst = max(worst, abs(hi), abs(lo))
    positive = [abs(b) for b in rhs_values if abs(b) > 0.0]
    denom = max(1.0, min(positive)) if positive else 1.0
    return float(np.clip(10.0 * worst / denom, 10.0, 1e6))


def generate(spec: GenSpec) -> Instance:
    """Deterministically build an instance from the spec."""
    count = path_count(spec.weeks, spec.levels)
    if count > spec.path_cap:
        raise CapExceededError(
            f"spec implies {count} paths per country, cap is {spec.path_cap}")
    rng = np.random.default_rng(
        np.random.SeedSequence((int(spec.seed) & (2**64 - 1), _GEN_STREAM)))
    if spec.levels == 1:
        grid = DiscountGrid(levels=(0.0,))
    else:
        grid = DiscountGrid(levels=tuple(
            float(v) for v in np.linspace(0.0, spec.max_discount, spec.levels)))

    articles = []
    for i in range(spec.articles):
        c = spec.countries
        base_price = rng.uniform(*spec.price_range, size=c)
        base_demand = rng.uniform(*spec.demand_range, size=c)
        stock = np.rint(base_demand * rng.uniform(*spec.stock_weeks_range, size=c))
        elasticity = rng.uniform(*spec.elasticity_range, size=c)
        salvage = rng.uniform(*spec.salvage_range, size=c)
        seasonality = rng.uniform(*spec.seasonality_range, size=spec.weeks)
        unit_cost = float(rng.uniform(*spec.unit_cost_range))
        articles.append(Article(
            id=i, base_price=tuple(base_price), initial_stock=tuple(stock),
            base_demand=tuple(base_demand), elasticity=tuple(elasticity),
            salvage_fraction=tuple(salvage), seasonality=tuple(seasonality),
            unit_cost_fraction=unit_cost))
    articles = tuple(articles)

    depth = grid.levels[-1]
    natural = _natural_sdr(articles, grid)
    skew = rng.uniform(0.55, 0.8, size=spec.countries)
    raws = []
    for c in range(spec.countries):
        if spec.sdr_band is not None:
            r_lo, r_hi = spec.sdr_band
        elif spec.preset == "easy":
            r_lo = 0.5 * natural[c]
            r_hi = natural[c] + 0.6 * (depth - natural[c])
        else:
            r_lo = natural[c] + skew[c] * (depth - natural[c])
            r_hi = min(0.95, depth + 0.02)
            if spec.preset == "infeasible-link" and c == 0:
                r_lo = min(0.95, depth + 0.05)
        raws.append(RawConstraint(kind=SDR_LOWER, country=c, target=float(r_lo)))
        raws.append(RawConstraint(kind=SDR_UPPER, country=c, target=float(r_hi)))
    constraints = tuple(canonicalize(raw, k) for k, raw in enumerate(raws))

    lam_bar = spec.lambda_bar
    if lam_bar is None:
        lam_bar = _default_lambda_bar(articles, grid, [c.rhs for c in constraints])
    return Instance(articles=articles, grid=grid, constraints=constraints,
                    lambda_bar=lam_bar, seed=spec.seed)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    status: str                       # "optimal" | "infeasible"
    value: float
    selection: tuple[int, ...]
    offers: tuple[Offer, ...] | None = None


def oracle_solve(instance: Instance, product_cap: int = DEFAULT_ORACLE_CAP,
                 chunk: int = 1 << 15, feas_tol: float = 1e-9) -> OracleResult:
    """Exhaustive search over the product of per-article offer sets.

    Deterministic: the lexicographically first combination among optimal ones
    wins (article 0 is the most significant digit).
    """
    offer_sets = [enumerate_offers(a, instance.grid, instance.constraints,
                                   product_cap=product_cap)
                  for a in instance.articles]
    sizes = [len(s) for s in offer_sets]
    total = math.prod(sizes)
    if total > product_cap:
        raise CapExceededError(
            f"oracle product has {total} combinations, cap is {product_cap}")
    profits = [np.array([o.profit for o in s]) for s in offer_sets]
    contribs = [np.stack([np.asarray(o.contributions) for o in s]) for s in offer_sets]
    rhs = instance.rhs
    scale = np.maximum(1.0, np.abs(rhs))
    for arr in contribs:
        if arr.size:
            scale = np.maximum(scale, np.abs(arr).max(axis=0))
    tol = feas_tol * scale

    strides = np.ones(len(sizes), dtype=np.int64)
    for i in range(len(sizes) - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes[i + 1]

    best_value = -np.inf
    best_flat = -1
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        flat = np.arange(start, stop, dtype=np.int64)
        value = np.zeros(stop - start)
        resid = np.tile(rhs, (stop - start, 1))
        for i, size in enumerate(sizes):
            digit = (flat // strides[i]) % size
            value += profits[i][digit]
            resid -= contribs[i][digit]
        feasible = np.all(resid <= tol[None, :], axis=1)
        if not feasible.any():
            continue
        value = np.where(feasible, value, -np.inf)
        k = int(np.argmax(value))
        if value[k] > best_value:
            best_value = float(value[k])
            best_flat = int(flat[k])
    if best_flat < 0:
        return OracleResult(status="infeasible", value=-np.inf, selection=())
    digits = tuple(int((best_flat // strides[i]) % sizes[i]) for i in range(len(sizes)))
    offers = tuple(offer_sets[i][d] for i, d in enumerate(digits))
    return OracleResult(status="optimal", value=best_value, selection=digits,
                        offers=offers)


def vertex_optimum(lp: DenseLP, dim_cap: int = 5, feas_tol: float = 1e-7) -> float:
    """Minimum of a small LP by enumerating candidate basic points.

    Collects every row (as equality candidate) plus every finite bound and
    intersects all size-n subsets; the best feasible intersection is the
    optimum of a feasible bounded LP. Exponential; guarded by ``dim_cap``.
    """
    n = lp.n_vars
    if n > dim_cap:
        raise CapExceededError(f"vertex enumeration capped at {dim_cap} variables, got {n}")
    planes = [(lp.rows[i], lp.rhs[i]) for i in range(lp.n_rows)]
    for jv in range(n):
        if np.isfinite(lp.lower[jv]):
            e = np.zeros(n)
            e[jv] = 1.0
            planes.append((e, lp.lower[jv]))
        if np.isfinite(lp.upper[jv]):
            e = np.zeros(n)
            e[jv] = 1.0
            planes.append((e, lp.upper[jv]))
    best = np.inf
    scale = 1.0 + float(np.abs(lp.rhs).max(initial=0.0))
    for combo in itertools.combinations(range(len(planes)), n):
        a = np.stack([planes[i][0] for i in combo])
        b = np.array([planes[i][1] for i in combo])
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        tol = feas_tol * scale * (1.0 + float(np.abs(x).max(initial=0.0)))
        ok = True
        for i in range(lp.n_rows):
            lhs = float(lp.rows[i] @ x)
            if lp.senses[i] == GE and lhs < lp.rhs[i] - tol:
                ok = False
            elif lp.senses[i] == LE and lhs > lp.rhs[i] + tol:
                ok = False
            elif lp.senses[i] == EQ and abs(lhs - lp.rhs[i]) > tol:
                ok = False
            if not ok:
                break
        if ok and np.all(x >= lp.lower - tol) and np.all(x <= lp.upper + tol):
            best = min(best, float(lp.c @ x))
    if not np.isfinite(best):
        raise InputError("vertex enumeration found no feasible basic point")
    return best


def oracle_master(pool: CutPool, lambda_bar: float | None = None,
                  formulation: str = "aggregated", group_count: int | None = None,
                  seed: int = 0, dim_cap: int = 5) -> float:
    """Master bound via vertex enumeration; cross-checks the simplex."""
    if formulation == "aggregated":
        return vertex_optimum(aggregated_lp(pool, lambda_bar), dim_cap=dim_cap)
    if formulation == "disaggregated":
        groups = [np.array([i]) for i in range(pool.n_articles)]
    elif formulation == "partial":
        if group_count is None:
            raise InputError("partial formulation needs group_count")
        groups = partition_articles(pool.n_articles, group_count, seed)
    else:
        raise InputError(f"unknown formulation {formulation!r}")
    lp = grouped_lp(pool, groups, lambda_bar)
    value = vertex_optimum(lp, dim_cap=dim_cap)
    return value
