import numpy as np
import pytest

from nsdi import FieldParams, IntegratorConfig


@pytest.fixture
def field137():
    return FieldParams(F_peak=0.137)


@pytest.fixture
def tight_config():
    return IntegratorConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
