import time

import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repro")

SUITE_BUDGET_SECONDS = 30.0

_results = pytest.StashKey[list]()
_started = pytest.StashKey[float]()
_elapsed = pytest.StashKey[float]()


def pytest_configure(config):
    config.stash[_results] = []
    config.stash[_started] = time.perf_counter()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, label, ok, detail)."""
    results = request.config.stash[_results]

    def record(number, label, ok, detail=""):
        results.append((number, label, bool(ok), detail))
        assert ok, f"criterion {number} ({label}) failed: {detail}"

    return record


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - session.config.stash[_started]
    session.config.stash[_elapsed] = elapsed
    if session.config.stash[_results] and elapsed > SUITE_BUDGET_SECONDS:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_results]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, ok, detail in sorted(results, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number}] {label}: {detail}")
    elapsed = config.stash[_elapsed]
    ok = elapsed <= SUITE_BUDGET_SECONDS
    terminalreporter.write_line(
        f"{'PASS' if ok else 'FAIL'} [10] suite runtime: {elapsed:.1f}s (budget {SUITE_BUDGET_SECONDS:.0f}s)"
    )
