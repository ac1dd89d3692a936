from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tumorpatch.grid import GridSpec

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def grid64():
    return GridSpec.square(64, 4.0)


@pytest.fixture
def line256():
    return GridSpec.square(256, 4.0, dim=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report: test_acceptance.py records one line per criterion
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<5} {status:<6} {detail}")
