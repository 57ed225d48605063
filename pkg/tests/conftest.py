import numpy as np
import pytest

from aammsu import CoefficientConfig, Constant, make_quadratic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_cfg():
    # the paper-default coefficient tuple used across the experiment tables
    return CoefficientConfig(
        d=10, M=0.75, mu=0.5, nu=0.5, gamma_tilde=0.75, beta2=0.999, epsilon=1e-8, eta=Constant(1e-3)
    )


@pytest.fixture
def quadratic10():
    return make_quadratic(10, eig_min=0.5, eig_max=2.0, problem_seed=7)
