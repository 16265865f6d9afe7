import math

import numpy as np
import pytest

from apscast import (
    SupportSet,
    UlaConfig,
    build_function_set,
    build_gram_system,
)

HALF_PI = math.pi / 2


@pytest.fixture(scope="session")
def reference_cfg():
    return UlaConfig.reference()


@pytest.fixture(scope="session")
def c_s_right():
    """Support information: spectrum lives in [0, pi/2]."""
    return SupportSet([[0.0, HALF_PI]])


@pytest.fixture(scope="session")
def gs_ref_no_si(reference_cfg):
    return build_gram_system(build_function_set(reference_cfg, None))


@pytest.fixture(scope="session")
def gs_ref_si(reference_cfg, c_s_right):
    return build_gram_system(build_function_set(reference_cfg, c_s_right))


@pytest.fixture(scope="session")
def small_cfg():
    """4 antennas at exactly half-wavelength spacing: the support-information
    Gram splits cleanly into exact zeros + well-separated eigenvalues, so the
    exact-membership identities hold to machine precision."""
    f_up = 1.8e9
    c = 3.0e8
    return UlaConfig(n_antennas=4, spacing=0.5 * c / f_up, f_up=f_up,
                     f_down=1.9e9, wave_speed=c)


@pytest.fixture(scope="session")
def gs_small_si(small_cfg, c_s_right):
    return build_gram_system(build_function_set(small_cfg, c_s_right))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
