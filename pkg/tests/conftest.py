import numpy as np
import pytest

from langevinlab import benchmarks


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quad1d():
    return benchmarks.quad1d()


@pytest.fixture
def quad2d():
    return benchmarks.quad2d()


@pytest.fixture
def cos1d():
    return benchmarks.cos1d()


@pytest.fixture
def cos2d():
    return benchmarks.cos2d()
