import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_rc():
    from parbo.config import default_config_path, load

    return load(default_config_path())


@pytest.fixture(scope="session")
def default_params(default_rc):
    return default_rc.reactor_params()


@pytest.fixture(scope="session")
def default_problem(default_rc):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return default_rc.build_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
