import os

import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def report_criterion():
    def _record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


def pytest_configure(config):
    # keep hypothesis deterministic across runs
    os.environ.setdefault("HYPOTHESIS_PROFILE", "ci")
    try:
        from hypothesis import settings
        settings.register_profile("ci", derandomize=True, deadline=None, max_examples=60)
        settings.load_profile("ci")
    except ImportError:
        pass
