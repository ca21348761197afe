import time

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request, capsys):
    """Print one acceptance PASS/FAIL line, then assert."""
    start = time.perf_counter()

    def _report(n, ok, detail, budget=None):
        took = time.perf_counter() - start
        within = budget is None or took < budget
        line = f"criterion {n:2d}: {'PASS' if ok and within else 'FAIL'}  {detail}  ({took:.1f} s"
        line += f" of {budget:g} s)" if budget else ")"
        request.config.stash[_LINES].append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line
    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
