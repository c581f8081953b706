import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stein_chisq.selftest import cos_source, gamma_table

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def cos_table():
    """Stein solution for h = cos against Gamma(1, 1/2), orders 1..4."""
    return gamma_table(1.0, 0.5, "cos", 4)


@pytest.fixture(scope="session")
def cos_radial():
    return cos_source(6)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.REPORT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.REPORT_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
