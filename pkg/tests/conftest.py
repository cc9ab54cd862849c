import warnings

import pytest

from locomem.domain import split_database
from locomem.factory import GenerationConfig, build_databases
from locomem.pipeline import train_memory

SMALL_T = 50


@pytest.fixture(scope="session")
def small_generation():
    """A quick paired database pair: 60 tasks over a 50-knot horizon."""
    return build_databases(GenerationConfig(n=60, seed=7, T=SMALL_T))


@pytest.fixture(scope="session")
def small_split(small_generation):
    """``{side: (train, test)}`` for the optimised databases."""
    return {side: split_database(db, 24, 6, 1) for side, db in small_generation.optimized.items()}


@pytest.fixture(scope="session")
def small_memories(small_split):
    """GPR and KNN memories per side, trained with a control model."""
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for kind in ("gpr", "knn"):
            out[kind] = {
                side: train_memory(train, K=30, M=20, kind=kind, with_u_model=True) for side, (train, _) in small_split.items()
            }
    return out


# One PASS/FAIL line per acceptance criterion in the terminal summary.
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    passed, _ = _criteria.get(number, (True, title))
    if report.failed or (report.when == "call" and report.skipped):
        passed = False
    _criteria[number] = (passed, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        passed, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}")
