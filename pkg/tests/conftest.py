from __future__ import annotations

import numpy as np
import pytest

from markdownopt import driver, gen, master, model


def make_offer(article_id=0, path=((0,),), profit=1.0, contributions=(0.0,),
               sales=(1.0,), price=(10.0,), base=(10.0,)):
    return model.Offer(article_id=article_id, discount_index=path, profit=profit,
                       contributions=contributions, first_week_sales=sales,
                       first_week_price=price, base_price=base)


def synthetic_pool(rng, n_articles, n_cuts, n_constraints, lambda_bar=50.0,
                   rhs=None):
    """Pool with random per-article values; no offer objects attached."""
    if rhs is None:
        rhs = rng.normal(0.0, 5.0, size=n_constraints)
    pool = master.CutPool(rhs=rhs, lambda_bar=lambda_bar, n_articles=n_articles)
    for _ in range(n_cuts):
        profits = rng.normal(50.0, 20.0, size=n_articles)
        contribs = rng.normal(0.0, 10.0, size=(n_articles, n_constraints))
        pool.add_values_cut(profits, contribs, master.ORIGIN_EXACT)
    return pool


def exact_pool(instance, outer, seed=0, lambda_bar=None):
    """Pool of exact cuts only, frozen after ``outer`` baseline iterations."""
    cfg = driver.DriverConfig(outer_limit=outer, inner_limit=0, strategy="none",
                              seed=seed, gap_tol=1e-12,
                              lambda_bar=lambda_bar)
    result = driver.run(instance, cfg)
    return result.pool


@pytest.fixture
def small_hard_instance():
    return gen.generate(gen.GenSpec(articles=4, countries=1, weeks=3, levels=3,
                                    preset="hard", seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
