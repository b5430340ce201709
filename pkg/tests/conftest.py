from __future__ import annotations

import re

import pytest

from patentgen.core import make_draft

_acceptance_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    match = re.match(r"test_criterion_(\d+)", report.nodeid.split("::")[-1])
    if not match:
        return
    n = int(match.group(1))
    if report.when == "call":
        _acceptance_results[n] = ("PASS" if report.passed else "FAIL", report.nodeid)
    elif report.when == "setup" and report.skipped:
        _acceptance_results[n] = ("SKIP", report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for n in sorted(_acceptance_results):
        outcome, nodeid = _acceptance_results[n]
        terminalreporter.write_line(f"  criterion {n}: {outcome}  ({nodeid.split('::')[-1]})")


@pytest.fixture
def draft():
    return make_draft(
        {
            1: "The problem is unreliable widget control under load.",
            2: "Existing controllers use fixed gain; this invention adapts gain online.",
            3: "A controller adjusts loop gain from sensor feedback in real time.",
            4: "Key point: adaptive gain scheduling; protection sought for the scheduler.",
            5: "Figure 1 is a block diagram of the adaptive controller.",
        },
        source_id="draft-001",
    )
