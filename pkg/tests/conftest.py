import math

import pytest

from hbargeo import geometry, metric, onedim, orbits, potential

FOUR_OVER_PI = 4.0 / math.pi


@pytest.fixture(scope="session")
def h1():
    return onedim.cosine()


@pytest.fixture(scope="session")
def sep(h1):
    return onedim.separable_spec(h1, h1)


@pytest.fixture(scope="session")
def pert():
    return potential.perturbed_separable()


@pytest.fixture(scope="session")
def sep_table(sep):
    return metric.support_table(sep, 256, 3)


@pytest.fixture(scope="session")
def sep_poly(sep_table):
    return geometry.build_f0(sep_table)


@pytest.fixture(scope="session")
def sep_homoclinic(sep):
    return orbits.shoot_homoclinic(sep, (1, 0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
