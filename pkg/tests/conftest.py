import numpy as np
import pytest

from torusnorm import FlatMetric, MinOptions
from torusnorm import fixtures


@pytest.fixture(scope="session")
def flat_identity():
    return fixtures.flat_identity()


@pytest.fixture(scope="session")
def flat_diag14():
    return fixtures.flat_diag(1.0, 4.0)


@pytest.fixture(scope="session")
def flat_sym():
    return FlatMetric([[2.0, 1.0], [1.0, 2.0]])


@pytest.fixture(scope="session")
def dip_metric():
    return fixtures.conformal_dip()


@pytest.fixture(scope="session")
def wave_metric():
    return fixtures.conformal_wave()


@pytest.fixture(scope="session")
def bump_metric():
    return fixtures.conformal_bump_grid()


@pytest.fixture(scope="session")
def liouville_metrics():
    return [fixtures.liouville_wave(), fixtures.liouville_two_wave(), fixtures.liouville_mixed()]


@pytest.fixture(scope="session")
def general_metric():
    return fixtures.random_general(np.random.default_rng(42))


def fast_opts(**kw):
    base = dict(n0=16, levels=0, starts=2, seed=7)
    base.update(kw)
    return MinOptions(**base)


def mid_opts(**kw):
    base = dict(n0=32, levels=1, starts=4, seed=7)
    base.update(kw)
    return MinOptions(**base)
