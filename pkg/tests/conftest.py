import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lppl.model import LpplParams
from lppl.simulate import generate_reference

settings.register_profile("lppl", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lppl")

BENCH_PARAMS = LpplParams(t_c=300.0, m=0.7, omega=10.0, phi=1.0, A=10.0, B=-0.1, C=0.02)


@pytest.fixture
def bench_params():
    return BENCH_PARAMS


@pytest.fixture(scope="session")
def reference_series():
    return generate_reference(BENCH_PARAMS, 240, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 9


@pytest.fixture
def record_criterion():
    """Store a criterion's verdict before asserting it, for the summary table."""

    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n not in ACCEPTANCE:
            terminalreporter.write_line(f"ACCEPTANCE criterion {n}: NOT RUN")
            continue
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")
