"""Shared fixtures and the acceptance summary printed after the run."""
import numpy as np
import pytest

from zicount.model import Dataset, ModelKind

ALL_KINDS = list(ModelKind)

_acceptance = {}
_notes = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split("_")[2])):
        status = "PASS" if _acceptance[name] == "passed" else "FAIL"
        note = _notes.get(name)
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{note}]" if note else ""))


def random_dataset(rng, n=50, p=3, q=3, y_max=50, scale=0.5):
    """Random designs with an intercept; counts drawn uniformly in [0, y_max]."""
    X = np.column_stack([np.ones(n), rng.normal(scale=scale, size=(n, p - 1))])
    Z = np.column_stack([np.ones(n), rng.normal(scale=scale, size=(n, q - 1))])
    y = rng.integers(0, y_max + 1, size=n)
    return Dataset(y, X, Z)


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the acceptance summary."""
    name = request.node.name

    def add(text):
        _notes[name] = f"{_notes[name]}; {text}" if name in _notes else text

    return add


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
