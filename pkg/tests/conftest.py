import numpy as np
import pytest

from truncq.lynden_bell import ObservedSample


def make_random_sample(rng: np.random.Generator, n: int | None = None,
                       truncated: bool = True) -> ObservedSample:
    """A valid random sample; truncated=False puts every t below min y."""
    if n is None:
        n = int(rng.integers(2, 40))
    x = rng.normal(0.0, 1.0, n)
    y = rng.normal(3.0, 1.0, n)
    if truncated:
        t = y - rng.uniform(0.0, 3.0, n)
    else:
        t = rng.uniform(y.min() - 2.0, y.min() - 1.0, n)
    return ObservedSample(x=x, y=y, t=t)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
