"""Shared fixtures: seeded generators and small reference models."""

import numpy as np
import pytest

from fourspin import datasets, hobm, rbm


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def chain6():
    """3-body chain on 6 sites at beta = 0.5."""
    return datasets.three_body_chain(6, 0.5)


@pytest.fixture
def random_table(rng):
    """Strictly positive probability table on 5 sites."""
    weights = rng.random(32) + 0.05
    return hobm.ProbabilityTable(5, weights / weights.sum())


@pytest.fixture
def small_rbm(rng):
    """Generic spin RBM with 4 visible and 3 hidden units."""
    return rbm.SpinRbm(
        0.6 * rng.standard_normal((4, 3)),
        0.4 * rng.standard_normal(3),
        0.3 * rng.standard_normal(4),
    )
