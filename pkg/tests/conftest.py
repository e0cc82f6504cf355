from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def random_hermitian(rng: np.random.Generator, d: int, complex_: bool = True) -> np.ndarray:
    A = rng.standard_normal((d, d))
    if complex_:
        A = A + 1j * rng.standard_normal((d, d))
    return 0.5 * (A + A.conj().T)


# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
