from __future__ import annotations

import numpy as np
import pytest

from irldr.domain import (
    Appliance,
    ApplianceClass,
    CANONICAL_APPLIANCES,
    Household,
    canonical_household,
)

# Collected by the acceptance tests; one line per criterion in the summary.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")


def make_household(series: dict[str, np.ndarray], household_id: str = "hh") -> Household:
    return canonical_household(household_id, series)


@pytest.fixture
def tiny_household() -> Household:
    """Two days, AC active in the afternoon of both, one EV run on day 1."""
    n = 2 * 96
    base = np.full(n, 0.5)
    ac = np.zeros(n)
    ac[40:72] = 1.0
    ac[96 + 40 : 96 + 72] = 1.2
    ev = np.zeros(n)
    ev[96 + 60 : 96 + 66] = 3.0
    return make_household({"base": base, "ac": ac, "ev": ev})


@pytest.fixture
def appliance_classes():
    return {a: ApplianceClass for a in CANONICAL_APPLIANCES}
