from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from levelcross.model import Exponential, Gamma, RenewalModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def exp_model():
    """Exponential first arrival, inter-arrival and jumps, all rate 1, premium rate 1."""
    e1 = Exponential(1.0)
    return RenewalModel(e1, e1, e1, 1.0)


@pytest.fixture
def gamma_time_model():
    return RenewalModel(Exponential(1.0), Gamma(2.0, 2.0), Exponential(1.0), 1.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
