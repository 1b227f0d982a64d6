import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = np.array([[2, 1], [1, 1]], dtype=np.int64)
# largest root of x^2 - 3x + 1 is (3 + sqrt 5)/2
LAMBDA_GOLDEN = float(np.log((3 + np.sqrt(5)) / 2))


@pytest.fixture
def golden():
    return GOLDEN.copy()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
