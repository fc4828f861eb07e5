import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from h2supply.domain import default_catalog
from h2supply.scenario import default_weather, demand_profiles, reduce_periods

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    import _gate
    if not _gate.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_gate.RESULTS):
        ok, detail = _gate.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def weather():
    return default_weather()


@pytest.fixture(scope="session")
def weather_2019(weather):
    return {2019: weather[2019]}


def scenarios(weather, total_t=2000.0, hours=24, kind="constant"):
    return reduce_periods(weather, demand_profiles(kind, total_t, weather), f"first_hours:{hours}")


@pytest.fixture(scope="session")
def make_scenarios(weather_2019):
    def make(total_t=2000.0, hours=24, kind="constant", weather=None):
        return scenarios(weather or weather_2019, total_t, hours, kind)
    return make


@pytest.fixture(scope="session")
def day_scenarios(weather_2019):
    return scenarios(weather_2019, hours=24)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
