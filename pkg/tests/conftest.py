import numpy as np
import pytest

from manifold_agg.geometry import Euclidean, Hyperbolic, Sphere


@pytest.fixture
def euclidean2():
    return Euclidean(2)


@pytest.fixture
def sphere():
    return Sphere()


@pytest.fixture
def hyperbolic():
    return Hyperbolic()


@pytest.fixture(params=["euclidean", "sphere", "hyperbolic"])
def manifold(request):
    return {
        "euclidean": Euclidean(2),
        "sphere": Sphere(),
        "hyperbolic": Hyperbolic(),
    }[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
