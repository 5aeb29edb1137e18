"""Shared fixtures and the acceptance verdict report."""

from __future__ import annotations

import numpy as np
import pytest

VERDICTS: dict[int, tuple[bool, str]] = {}


def record_verdict(number: int, passed: bool, detail: str) -> None:
    """Store one acceptance verdict; printed in the terminal summary."""
    VERDICTS[number] = (passed, detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
