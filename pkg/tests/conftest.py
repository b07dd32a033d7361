"""Shared fixtures: benchmark instances and their exact solutions.

The two default benchmark instances and the small symmetric instance are
session-scoped because the exact transportation solve on the 300x300
instance is the most expensive single step of the suite.
"""
import numpy as np
import pytest

from otanneal import DEFAULT_SEEDS, GeneratorSpec, Problem, exact_ot, generate


@pytest.fixture(scope="session")
def tiny_symmetric() -> Problem:
    """2x2 instance with symmetric zero-diagonal cost and uniform marginals."""
    return Problem(
        cost=np.array([[0.0, 1.0], [1.0, 0.0]]),
        p=np.array([0.5, 0.5]),
        q=np.array([0.5, 0.5]),
        label="tiny-symmetric",
    )


@pytest.fixture(scope="session")
def random_default() -> Problem:
    """The 100x100 normal-cost benchmark instance at its default seed."""
    return generate(GeneratorSpec("random", 100, 100, DEFAULT_SEEDS["random"]))


@pytest.fixture(scope="session")
def geometric_default() -> Problem:
    """The 300x300 blobs-vs-annulus benchmark instance at its default seed."""
    return generate(GeneratorSpec("geometric", 300, 300, DEFAULT_SEEDS["geometric"]))


@pytest.fixture(scope="session")
def tiny_exact(tiny_symmetric):
    return exact_ot(tiny_symmetric)


@pytest.fixture(scope="session")
def random_exact_value(random_default) -> float:
    return exact_ot(random_default).value


@pytest.fixture(scope="session")
def geometric_exact(geometric_default):
    return exact_ot(geometric_default)
