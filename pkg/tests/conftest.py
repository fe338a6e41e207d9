from fractions import Fraction

import pytest

from tailkit.core import GroundSet, IndicatorFamily


@pytest.fixture
def pair_family():
    """Three elements at p=1/2 with Q(a)={0,1}, Q(b)={1,2}."""
    return IndicatorFamily.from_members(GroundSet.uniform(3, 0.5), [[0, 1], [1, 2]])


@pytest.fixture
def pair_family_exact():
    return IndicatorFamily.from_members(GroundSet.uniform(3, Fraction(1, 2)), [[0, 1], [1, 2]])



def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
