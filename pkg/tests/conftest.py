"""Shared fixtures and the acceptance summary table.

Acceptance tests record one line per criterion through `record_acceptance`;
the lines are printed in a dedicated section after the run so pass/fail
status is visible even for passing tests (pytest otherwise swallows stdout).
"""

from __future__ import annotations

import numpy as np
import pytest

from efsm import ActionCodec, EfsmModel

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture
def small_model():
    """3-dimensional model with a 4-action codec, no data yet."""
    return EfsmModel(dim=3, codec=ActionCodec(-1.0, 1.0, 0.5))
