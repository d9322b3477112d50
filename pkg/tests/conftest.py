import numpy as np
import pytest

from freebound.exact import (
    critical_catenoid,
    critical_catenoid_parameters,
    equatorial_disk,
    rotational_minimal,
    shoot_rotational,
    spherical_cap,
)


@pytest.fixture(scope="session")
def cat_params():
    return critical_catenoid_parameters()


@pytest.fixture(scope="session")
def catenoid(cat_params):
    return critical_catenoid(cat_params)


@pytest.fixture(scope="session")
def disk2():
    return equatorial_disk(2)


@pytest.fixture(scope="session")
def disk3():
    return equatorial_disk(3)


@pytest.fixture(scope="session")
def shot3():
    return shoot_rotational(3)


@pytest.fixture(scope="session")
def rot3(shot3):
    return rotational_minimal(3, shot3)


@pytest.fixture(scope="session")
def cap():
    return spherical_cap(0.5, 2)

