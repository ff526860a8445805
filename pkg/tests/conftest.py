import math

import pytest

from gtfk import models
from gtfk.config import NumericsConfig


@pytest.fixture(scope="session")
def vasicek_std():
    return models.vasicek(a=0.1, b=0.03, sigma=0.02)


@pytest.fixture(scope="session")
def vasicek_wide():
    # high-volatility variant used where the drift primitive matters
    return models.vasicek(a=0.1, b=0.0, sigma=0.85)


@pytest.fixture(scope="session")
def quadratic_std():
    return models.quadratic(a=0.1, b=0.0, sigma=0.02, beta=1.0, gamma=0.5)


@pytest.fixture(scope="session")
def bk_table1():
    # benchmark parameter set: high-volatility lognormal rates
    return models.black_karasinski(a=0.1, b=math.log(0.04), sigma=0.85)


@pytest.fixture(scope="session")
def garch_table1():
    return models.garch(a=0.1, b=0.04, sigma=0.6)


@pytest.fixture(scope="session")
def garch_table2():
    return models.garch(a=0.1, b=0.02, sigma=0.5)


@pytest.fixture(scope="session")
def fast_cfg():
    """Coarser-but-adequate settings for tests that sweep many cases."""
    return NumericsConfig(pde_n_space=1201, pde_n_time=800)


@pytest.fixture(scope="session")
def all_models(vasicek_std, quadratic_std, bk_table1, garch_table1):
    return {
        "vasicek": (vasicek_std, 0.03),
        "quadratic": (quadratic_std, 0.01),
        "bk": (bk_table1, math.log(0.06)),
        "garch": (garch_table1, 0.06),
    }
