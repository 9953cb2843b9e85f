import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture(autouse=True)
def _output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("QDAFC_OUTPUT_ROOT", str(tmp_path / "runs"))


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    A test that errors before reporting still gets a FAIL line.
    """
    lines = request.config.stash[ACCEPTANCE]
    n0 = len(lines)
    name = request.node.name.removeprefix("test_")

    def report(passed: bool, detail: str) -> bool:
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed

    yield report
    if len(lines) == n0:
        lines.append(f"FAIL  {name}: did not complete")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
        terminalreporter.write_line(f"{sum(x.startswith('PASS') for x in lines)}/{len(lines)} criteria passed")
