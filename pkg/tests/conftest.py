import numpy as np
import pytest

from metacal import doe, kriging
from metacal.scenario import default_scenario

DESIGN_SEED = 11


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def observations(scenario):
    return scenario.observations()


@pytest.fixture(scope="session")
def table(scenario, observations):
    design = doe.lhs_sample(doe.default_design_size(scenario.bounds.dim), scenario.bounds, DESIGN_SEED)
    return doe.evaluate_design(design, scenario, observations)


@pytest.fixture(scope="session")
def models(table):
    return kriging.fit_all(table, kriging.KrigingConfig(seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []  # (criterion, passed, detail) recorded by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
