import numpy as np
import pytest
from hypothesis import settings

from multiergodic.potential import Potential

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

EXAMPLE1 = [0, 0, 0, 1]
EXAMPLE2 = [1, -1, -1, 1]
EXAMPLE3 = [0, 1, -1, 0]


@pytest.fixture
def ex1():
    return Potential.from_values(2, 2, 2, EXAMPLE1)


@pytest.fixture
def ex2():
    return Potential.from_values(2, 2, 2, EXAMPLE2)


@pytest.fixture
def ex3():
    return Potential.from_values(2, 2, 2, EXAMPLE3)


def random_potential(rng, m=None, q=None, ell=None, lo=-2.0, hi=2.0):
    m = m or int(rng.integers(2, 4))
    q = q or int(rng.choice([2, 3]))
    ell = ell or int(rng.integers(2, 4))
    return Potential.from_values(m, q, ell, rng.uniform(lo, hi, m**ell))


def random_corpus(seed, count):
    rng = np.random.default_rng(seed)
    return [random_potential(rng) for _ in range(count)]
