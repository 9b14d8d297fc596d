import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbcontrol.config import ProblemConfig

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_cfg():
    return ProblemConfig(Ns=32, Nt=64)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_slice(cfg, rng):
    u = rng.standard_normal(cfg.Ns + 1)
    u[-1] = 0.0
    if not cfg.neumann_left:
        u[0] = 0.0
    return u
