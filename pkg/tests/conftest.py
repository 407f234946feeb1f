import numpy as np
import pytest

from insolemotion.data.types import Skeleton
from insolemotion.synth import GaitStyle, generate

CRITERIA = {
    1: "gradient correctness",
    2: "diffusion schedule invariants",
    3: "insole MHA structure",
    4: "displacement loss oracle",
    5: "overfit sanity",
    6: "synthetic generalization ordering",
    7: "metric oracles",
    8: "CLI determinism",
    9: "long-sequence stitching",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for n in getattr(report, "criteria", ()):
        _outcomes.setdefault(n, []).append(report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.criteria = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n} ({CRITERIA[n]}): {status}")


@pytest.fixture(scope="session")
def skeleton():
    return Skeleton.default()


@pytest.fixture(scope="session")
def tiny_skeleton():
    return Skeleton.generic(10)


@pytest.fixture(scope="session")
def walk_seq():
    return generate(GaitStyle("walk"), 10.0, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
