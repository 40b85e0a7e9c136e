from __future__ import annotations

import shutil

import pytest

from defix.config import load_config
from defix.fixture import fixture_dir
from defix.pipeline import Pipeline, run_all, write_artifacts

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        prev = _CRITERIA.get(number)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"{status} criterion {number:>2}: {title}")


@pytest.fixture(scope="session")
def fixture_config():
    return load_config(fixture_dir() / "defix.ini")


@pytest.fixture(scope="session")
def fixture_pipeline(fixture_config):
    return Pipeline(fixture_config)


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory, fixture_pipeline):
    """run-all on the bundled fixture, written once per session."""
    out = tmp_path_factory.mktemp("run")
    artifacts = run_all(fixture_pipeline)
    manifest = write_artifacts(fixture_pipeline, artifacts, out, "run-all")
    return out, artifacts, manifest


@pytest.fixture
def fixture_copy(tmp_path):
    dest = tmp_path / "inputs"
    shutil.copytree(fixture_dir(), dest)
    return dest
