import numpy as np
import pytest

from exposure_eval import _backend, _kernels_py, exposure, metrics


def _modules():
    mods = {"python": _kernels_py}
    if "cython" in _backend.available():
        from exposure_eval import _kernels

        mods["cython"] = _kernels
    return mods


@pytest.fixture(params=sorted(_modules()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    mod = _modules()[request.param]
    monkeypatch.setattr(exposure, "kernels", mod)
    monkeypatch.setattr(metrics, "kernels", mod)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion, shown in the terminal summary."""

    def record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}{': ' + detail if detail else ''}")
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
