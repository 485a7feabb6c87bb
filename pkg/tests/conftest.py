import numpy as np
import pytest

from wrse.core import SnapshotTable
from wrse.synth import Scenario, generate

_CRITERIA: dict = {}


@pytest.fixture(scope="session")
def cohort():
    """Default ExponentialPH cohort shared by the slower tests."""
    sc = Scenario()
    ds = generate(sc, 2000)
    return sc, ds, SnapshotTable.from_dataset(ds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _CRITERIA[name] = f"{status} {name} {detail}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA.values(), key=lambda s: int(s.split("criterion_")[1].split("_")[0])):
        terminalreporter.write_line(line)
