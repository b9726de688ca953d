import time
from contextlib import contextmanager

import pytest

from tokenprune import _kernels

_RESULTS = []


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # one-time JIT compilation stays out of every timed block
    _kernels.warmup()


@contextmanager
def criterion(number, title, budget_s):
    """Time a block, record PASS/FAIL, and enforce its runtime budget."""
    start = time.perf_counter()
    ok = False
    detail = ""
    try:
        yield
        ok = True
    except AssertionError as e:
        detail = str(e).splitlines()[0] if str(e) else "assertion failed"
        raise
    finally:
        elapsed = time.perf_counter() - start
        if ok and elapsed >= budget_s:
            ok = False
            detail = f"runtime {elapsed:.2f}s over budget {budget_s}s"
        _RESULTS.append((number, title, ok, elapsed, budget_s, detail))
        line = _line(_RESULTS[-1])
        print("\n" + line)
    if elapsed >= budget_s:
        pytest.fail(detail)


def _line(r):
    number, title, ok, elapsed, budget, detail = r
    status = "PASS" if ok else "FAIL"
    tail = f" -- {detail}" if detail else ""
    return f"[{status}] criterion {number:>2}: {title} ({elapsed:.2f}s / {budget:g}s){tail}"


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(_RESULTS):
        terminalreporter.write_line(_line(r))
