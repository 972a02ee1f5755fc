from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qlmaxwell.core import Grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    """Record the pass/fail line of an acceptance criterion; printed in the summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return Grid((8, 8, 8))


def bump_state(grid: Grid, center=(0.5, 0.5, 0.3), radius=0.25) -> np.ndarray:
    """Compact pulse E1 = b, H2 = -b used by the energy scenario."""
    X = grid.coords()
    r2 = np.sum((X - np.asarray(center)) ** 2, axis=-1) / radius ** 2
    b = np.zeros(r2.shape)
    inside = r2 < 1
    b[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    u = np.zeros(grid.shape + (6,))
    u[..., 0] = b
    u[..., 4] = -b
    return u
