import numpy as np
import pytest

from sharpcate.data import ObsDataset

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(criterion, passed, detail)``."""
    def _report(criterion, passed, detail=""):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def small_dataset(rng, n=12, d=1, e1=True):
    X = rng.uniform(-1, 1, size=(n, d))
    T = np.zeros(n, dtype=int)
    T[rng.permutation(n)[: n // 2]] = 1
    Y = rng.normal(size=n)
    e = rng.uniform(0.1, 0.9, size=n) if e1 else None
    return ObsDataset(X, T, Y, e)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
