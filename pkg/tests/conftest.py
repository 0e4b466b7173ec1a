import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mgdispatch.model import MicrogridParams, initial_state, period_lift
from mgdispatch.scenarios import Scenario, ScenarioSet, default_profiles

settings.register_profile('default', deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('default')

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_REPORT = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section('acceptance criteria')
    for key in sorted(ACCEPTANCE_REPORT):
        terminalreporter.write_line(ACCEPTANCE_REPORT[key])


@pytest.fixture(scope='session')
def params():
    return MicrogridParams()


@pytest.fixture(scope='session')
def lift(params):
    return period_lift(params.arma)


@pytest.fixture(scope='session')
def short_params():
    """A 12-period day, for tests that roll policies or train."""
    return MicrogridParams(periods=12)


@pytest.fixture(scope='session')
def short_scenarios(short_params):
    return ScenarioSet(default_profiles(short_params), seed=3, count=4)


@pytest.fixture(scope='session')
def forecast(params):
    return default_profiles(params)


@pytest.fixture
def start_state(params, forecast):
    return initial_state(params, forecast.row(0))


@pytest.fixture(scope='session')
def deterministic_day(forecast):
    return Scenario.deterministic(forecast)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
