"""Domain model: articles, offers, linking constraints, and instances.

Linking constraints are canonicalized on ingestion so the optimization core
only ever sees one sense: every stored row reads

    sum_i a_i(offer_i) >= rhs

where ``a_i`` is the article's additive contribution functional. A ``<=``
input is negated (contribution weights and right-hand side) when it enters
the system, which preserves its evaluation semantics exactly.

Sales-weighted discount-rate (sDR) targets are linearised by clearing the
denominator:

    sDR >= r   <=>   sum_i ((p_i - xbar_i) - r * p_i) * s_i >= 0

which is exact whenever ``sum_i p_i * s_i > 0`` and vacuously satisfied when
all first-week sales are zero. Here ``p_i`` is the undiscounted price,
``xbar_i`` the first-week selling price and ``s_i`` the first-week sales of
article ``i`` in the constraint's country. Upper bounds use the negated row.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

FORMAT_VERSION = 1

SDR_LOWER = "sdr_lower"
SDR_UPPER = "sdr_upper"
CUSTOM_LINEAR = "custom_linear"
KINDS = (SDR_LOWER, SDR_UPPER, CUSTOM_LINEAR)

GE = ">="
LE = "<="


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    return value


def _float_tuple(name: str, values) -> tuple[float, ...]:
    return tuple(_finite(name, v) for v in values)


@dataclass(frozen=True)
class DiscountGrid:
    """Shared ladder of discount fractions; index 0 is always full price."""

    levels: tuple[float, ...]

    def __post_init__(self):
        levels = _float_tuple("discount level", self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise InputError("discount grid needs at least one level")
        if levels[0] != 0.0:
            raise InputError("first discount level must be 0.0 (full price)")
        for lo, hi in zip(levels, levels[1:]):
            if not hi > lo:
                raise InputError("discount levels must be strictly increasing")
        if levels[-1] >= 1.0:
            raise InputError("discount levels must stay below 1.0")

    @property
    def count(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Article:
    """Per-article data. Country-indexed fields share one length C.

    ``seasonality`` has one multiplier per week and fixes the horizon T.
    """

    id: int
    base_price: tuple[float, ...]
    initial_stock: tuple[float, ...]
    base_demand: tuple[float, ...]
    elasticity: tuple[float, ...]
    salvage_fraction: tuple[float, ...]
    seasonality: tuple[float, ...]
    unit_cost_fraction: float

    def __post_init__(self):
        for name in ("base_price", "initial_stock", "base_demand", "elasticity",
                     "salvage_fraction", "seasonality"):
            object.__setattr__(self, name, _float_tuple(name, getattr(self, name)))
        object.__setattr__(self, "unit_cost_fraction",
                           _finite("unit_cost_fraction", self.unit_cost_fraction))
        c = len(self.base_price)
        if c < 1:
            raise InputError("article needs at least one country")
        for name in ("initial_stock", "base_demand", "elasticity", "salvage_fraction"):
            if len(getattr(self, name)) != c:
                raise InputError(f"article {self.id}: {name} length must match base_price")
        if len(self.seasonality) < 1:
            raise InputError("article needs a horizon of at least one week")
        if any(p <= 0.0 for p in self.base_price):
            raise InputError("base prices must be positive")
        if any(v < 0.0 for v in self.initial_stock + self.base_demand
               + self.elasticity + self.seasonality):
            raise InputError("stock, demand, elasticity and seasonality must be non-negative")
        if any(not (0.0 <= v < 1.0) for v in self.salvage_fraction):
            raise InputError("salvage fractions must lie in [0, 1)")
        if not (0.0 <= self.unit_cost_fraction < 1.0):
            raise InputError("unit cost fraction must lie in [0, 1)")

    @property
    def countries(self) -> int:
        return len(self.base_price)

    @property
    def horizon(self) -> int:
        return len(self.seasonality)


@dataclass(frozen=True)
class Offer:
    """One article's complete decision plus cached evaluation results.

    The caches (profit, per-constraint contributions, first-week sales and
    prices) are exactly the values recomputable from the article data and the
    discount paths; they must never be carried across instance changes.
    ``base_price`` is cached alongside so constraint rows can be re-evaluated
    from the offer alone.
    """

    article_id: int
    discount_index: tuple[tuple[int, ...], ...]
    profit: float
    contributions: tuple[float, ...]
    first_week_sales: tuple[float, ...]
    first_week_price: tuple[float, ...]
    base_price: tuple[float, ...]

    def __post_init__(self):
        paths = tuple(tuple(int(w) for w in path) for path in self.discount_index)
        object.__setattr__(self, "discount_index", paths)
        object.__setattr__(self, "profit", _finite("profit", self.profit))
        for name in ("contributions", "first_week_sales", "first_week_price", "base_price"):
            object.__setattr__(self, name, _float_tuple(name, getattr(self, name)))
        c = len(paths)
        if c < 1 or any(len(p) != len(paths[0]) for p in paths):
            raise InputError("discount paths must cover every country with equal horizons")
        for name in ("first_week_sales", "first_week_price", "base_price"):
            if len(getattr(self, name)) != c:
                raise InputError(f"offer cache {name} must have one entry per country")
        for path in paths:
            if any(b < a for a, b in zip(path, path[1:])):
                raise InputError("discounts may only deepen over time")
            if any(w < 0 for w in path):
                raise InputError("discount indices must be non-negative")


@dataclass(frozen=True)
class RawConstraint:
    """A linking constraint as supplied by the user, before canonicalization.

    sDR kinds carry their sense in the kind itself (lower: sDR >= target,
    upper: sDR <= target) and always linearise to rhs 0. Custom rows weight
    per-country first-week revenue (price times sales) and may use either
    sense.
    """

    kind: str
    country: int | None = None
    target: float | None = None
    weights: tuple[float, ...] | None = None
    sense: str = GE
    rhs: float = 0.0


@dataclass(frozen=True)
class LinkingConstraint:
    """Canonical (>=) linking constraint row."""

    id: int
    kind: str
    country: int | None = None
    target: float | None = None
    weights: tuple[float, ...] | None = None
    rhs: float = 0.0


def canonicalize(raw: RawConstraint, cid: int) -> LinkingConstraint:
    """Normalise a raw constraint to the canonical >= sense.

    ``<=`` custom rows have weights and rhs negated; sDR bounds embed their
    sense in the linearised contribution formula and keep rhs 0.
    """
    if raw.kind not in KINDS:
        raise InputError(f"unknown constraint kind {raw.kind!r}")
    rhs = _finite("constraint rhs", raw.rhs)
    if raw.kind in (SDR_LOWER, SDR_UPPER):
        if raw.sense != GE:
            raise InputError("sDR bounds carry their sense in the kind; do not pass one")
        if raw.country is None or int(raw.country) < 0:
            raise InputError("sDR constraints need a country index")
        if raw.target is None:
            raise InputError("sDR constraints need a target rate")
        target = _finite("sDR target", raw.target)
        if not (0.0 <= target < 1.0):
            raise InputError("sDR targets must lie in [0, 1)")
        if rhs != 0.0:
            raise InputError("sDR constraints linearise to rhs 0")
        return LinkingConstraint(id=cid, kind=raw.kind, country=int(raw.country),
                                 target=target, rhs=0.0)
    if raw.weights is None:
        raise InputError("custom linear constraints need per-country weights")
    weights = _float_tuple("constraint weight", raw.weights)
    if raw.sense == GE:
        return LinkingConstraint(id=cid, kind=CUSTOM_LINEAR, weights=weights, rhs=rhs)
    if raw.sense == LE:
        return LinkingConstraint(id=cid, kind=CUSTOM_LINEAR,
                                 weights=tuple(-w for w in weights), rhs=-rhs)
    raise InputError(f"unknown constraint sense {raw.sense!r}")


def negate(constraint: LinkingConstraint) -> RawConstraint:
    """The <= raw form whose canonicalization evaluates like ``constraint``."""
    if constraint.kind != CUSTOM_LINEAR:
        raise InputError("only custom rows have an explicit negated form")
    return RawConstraint(kind=CUSTOM_LINEAR,
                         weights=tuple(-w for w in constraint.weights),
                         sense=LE, rhs=-constraint.rhs)


def contribution_term(constraint: LinkingConstraint, country: int, base_price,
                      first_week_price, first_week_sales):
    """One country's additive share of the constraint row value.

    Array-safe: ``first_week_price`` / ``first_week_sales`` may be numpy
    arrays over candidate offers (``base_price`` is the scalar country price).
    """
    if constraint.kind == CUSTOM_LINEAR:
        return constraint.weights[country] * np.asarray(first_week_price) * first_week_sales
    if country != constraint.country:
        return np.zeros_like(np.asarray(first_week_sales, dtype=float))
    depth = base_price - np.asarray(first_week_price)
    term = (depth - constraint.target * base_price) * first_week_sales
    return term if constraint.kind == SDR_LOWER else -term


def contribution(offer: Offer, constraint: LinkingConstraint) -> float:
    """The offer's additive term in the canonical constraint row."""
    if constraint.kind == CUSTOM_LINEAR:
        return float(sum(
            contribution_term(constraint, c, offer.base_price[c],
                              offer.first_week_price[c], offer.first_week_sales[c])
            for c in range(len(offer.base_price))))
    c = constraint.country
    if c >= len(offer.base_price):
        raise InputError("constraint references a country the offer does not cover")
    return float(contribution_term(constraint, c, offer.base_price[c],
                                   offer.first_week_price[c], offer.first_week_sales[c]))


def sdr_contribution(offer: Offer, constraint: LinkingConstraint) -> float:
    """Additive term of the linearised sDR bound for one offer.

    Lower bound with target r: ((p - xbar) - r*p) * s; upper bounds use the
    negated term per canonicalization. Zero sales yield zero contribution.
    """
    if constraint.kind not in (SDR_LOWER, SDR_UPPER):
        raise InputError("sdr_contribution expects an sDR constraint")
    return contribution(offer, constraint)


def evaluate_linking(offers, constraints) -> np.ndarray:
    """Residual vector rhs - sum_i a_i per constraint; positive means violated."""
    ids = [o.article_id for o in offers]
    if len(set(ids)) != len(ids):
        raise InputError("expected exactly one offer per article")
    n_constraints = len(constraints)
    for o in offers:
        if len(o.contributions) != n_constraints:
            raise InputError("offer contribution cache does not match constraint count")
    residual = np.array([c.rhs for c in constraints], dtype=float)
    for o in offers:
        residual -= np.asarray(o.contributions, dtype=float)
    return residual


@dataclass(frozen=True)
class Instance:
    """The full pricing problem over a shared discount grid."""

    articles: tuple[Article, ...]
    grid: DiscountGrid
    constraints: tuple[LinkingConstraint, ...]
    lambda_bar: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "articles", tuple(self.articles))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "lambda_bar", _finite("lambda_bar", self.lambda_bar))
        if not self.articles:
            raise InputError("instance needs at least one article")
        if self.lambda_bar <= 0.0:
            raise InputError("lambda_bar must be positive")
        c = self.articles[0].countries
        if any(a.countries != c for a in self.articles):
            raise InputError("all articles must cover the same countries")
        for k, con in enumerate(self.constraints):
            if con.id != k:
                raise InputError("constraint ids must match their position")
            if con.kind in (SDR_LOWER, SDR_UPPER) and not (0 <= con.country < c):
                raise InputError(f"constraint {k} references invalid country {con.country}")
            if con.kind == CUSTOM_LINEAR and len(con.weights) != c:
                raise InputError(f"constraint {k} needs one weight per country")

    @property
    def n_articles(self) -> int:
        return len(self.articles)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def countries(self) -> int:
        return self.articles[0].countries

    @property
    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=float)


# ---------------------------------------------------------------------------
# Instance file format (JSON, "format": 1)
# ---------------------------------------------------------------------------

def _constraint_to_dict(con: LinkingConstraint) -> dict:
    d: dict = {"kind": con.kind}
    if con.kind in (SDR_LOWER, SDR_UPPER):
        d["country"] = con.country
        d["target"] = con.target
    else:
        d["weights"] = list(con.weights)
        d["sense"] = GE
        d["rhs"] = con.rhs
    return d


def _constraint_from_dict(d: dict, cid: int) -> LinkingConstraint:
    raw = RawConstraint(
        kind=d.get("kind", ""),
        country=d.get("country"),
        target=d.get("target"),
        weights=tuple(d["weights"]) if "weights" in d else None,
        sense=d.get("sense", GE),
        rhs=d.get("rhs", 0.0),
    )
    return canonicalize(raw, cid)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "format": FORMAT_VERSION,
        "seed": inst.seed,
        "lambda_bar": inst.lambda_bar,
        "grid": list(inst.grid.levels),
        "articles": [
            {
                "id": a.id,
                "base_price": list(a.base_price),
                "initial_stock": list(a.initial_stock),
                "base_demand": list(a.base_demand),
                "elasticity": list(a.elasticity),
                "salvage_fraction": list(a.salvage_fraction),
                "seasonality": list(a.seasonality),
                "unit_cost_fraction": a.unit_cost_fraction,
            }
            for a in inst.articles
        ],
        "constraints": [_constraint_to_dict(c) for c in inst.constraints],
    }


def instance_from_dict(d: dict) -> Instance:
    if d.get("format") != FORMAT_VERSION:
        raise InputError(f"unsupported instance format {d.get('format')!r}")
    try:
        articles = tuple(
            Article(
                id=int(a["id"]),
                base_price=tuple(a["base_price"]),
                initial_stock=tuple(a["initial_stock"]),
                base_demand=tuple(a["base_demand"]),
                elasticity=tuple(a["elasticity"]),
                salvage_fraction=tuple(a["salvage_fraction"]),
                seasonality=tuple(a["seasonality"]),
                unit_cost_fraction=a["unit_cost_fraction"],
            )
            for a in d["articles"]
        )
        grid = DiscountGrid(levels=tuple(d["grid"]))
        constraints = tuple(_constraint_from_dict(c, k)
                            for k, c in enumerate(d["constraints"]))
        return Instance(articles=articles, grid=grid, constraints=constraints,
                        lambda_bar=d["lambda_bar"], seed=int(d.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance document: {exc}") from exc


def instance_json_bytes(inst: Instance) -> bytes:
    return (json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n").encode()


def save_instance(inst: Instance, path) -> None:
    with open(path, "wb") as fh:
        fh.write(instance_json_bytes(inst))


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"not valid JSON: {path}") from exc
    return instance_from_dict(payload)
