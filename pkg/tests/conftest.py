import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trendsynth.fixture import make_fixture_returns  # noqa: E402

REPO = Path(__file__).resolve().parents[1]
DEMO_PRICES = REPO / "data" / "demo_prices.csv"
GOLDEN = Path(__file__).parent / "golden"

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record an acceptance-criterion outcome; printed in the terminal summary."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def small_panel():
    return make_fixture_returns(n_assets=8, n_days=600, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
