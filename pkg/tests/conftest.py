"""Shared fixtures and the acceptance-criteria summary block."""

from __future__ import annotations

import sys

import pytest

from skilltransfer import default_scenario, table1_profiles


@pytest.fixture(scope="session")
def table1_pair():
    """The built-in expert/learner pair at the default linkage strength."""
    return table1_profiles()


@pytest.fixture(scope="session")
def base_scenario():
    return default_scenario()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # One line per acceptance criterion, collected by test_acceptance as it
    # runs, so the verdicts survive pytest's output capture.
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.line(line)
