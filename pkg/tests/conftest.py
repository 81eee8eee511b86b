import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from anclab.synth import ScenarioSpec, synth_scenario  # noqa: E402


@pytest.fixture(scope="session")
def short_scenario():
    """One second at +5 dB; enough for the filters to make visible progress."""
    return synth_scenario(ScenarioSpec(duration=1.0, seed=11))


@pytest.fixture(scope="session")
def reference_scenario():
    """The 10 s, +5 dB scenario used by the headline experiments."""
    return synth_scenario(ScenarioSpec(duration=10.0, seed=0))


# filled by test_acceptance.py: (number, title, passed, detail)
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}")
