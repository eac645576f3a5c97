import numpy as np
import pytest

from pvot.dgp import make_stream


@pytest.fixture
def rng():
    """Fresh deterministic generator, one stream per test."""
    return make_stream(20240817, 0)


def make_regression(rng, n, beta=2.0, noise=1.0):
    """Small iid regression sample for oracle tests."""
    from pvot.dgp import Sample

    x = rng.standard_normal(n)
    y = beta * x + noise * rng.standard_normal(n)
    return Sample(y=y, x=x.reshape(-1, 1), n=n)
