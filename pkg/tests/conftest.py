from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): one acceptance criterion, reported in the summary")
    config.stash[_RESULTS] = []


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None and (report.when == "call" or (report.when == "setup" and not report.passed)):
        item.config.stash[_RESULTS].append((marker.args[0], report.passed))
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed in results:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}")
    ok = sum(1 for _, p in results if p)
    terminalreporter.write_line(f"{ok}/{len(results)} criteria met")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
