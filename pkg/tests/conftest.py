"""Shared test plumbing: acceptance result lines echoed in the summary."""

from __future__ import annotations

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

acceptance_results: list[str] = []


def check(ok: bool, label: str, detail: str) -> bool:
    """Record one PASS/FAIL line for the terminal summary; returns ok."""
    acceptance_results.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_results:
        terminalreporter.section("acceptance results")
        for line in acceptance_results:
            terminalreporter.line(line)
