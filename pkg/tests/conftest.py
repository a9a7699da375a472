import os

import pytest

from indexfish.experiments import FLEETS, SweepError, SweepGrid, run_norwegian, run_single_input_sweep

JOBS = os.cpu_count() or 1


def _records(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SweepError as exc:
        # criteria judge the non-convergence rate themselves
        return exc.records


@pytest.fixture(scope="session")
def full_sweeps():
    """Default single-input grid for both contracts, 1000 draws per cell."""
    return {
        index: _records(run_single_input_sweep, SweepGrid(contract_index=index, draws=1000), jobs=JOBS)
        for index in ("omega", "theta")
    }


@pytest.fixture(scope="session")
def norwegian_runs():
    """All three fleets under both contracts on the default risk grid."""
    return {
        (fleet.fleet, index): _records(run_norwegian, fleet, index, draws=1000, jobs=JOBS)
        for fleet in FLEETS.values()
        for index in ("omega", "theta")
    }


_ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion id -> one-line verdict, echoed in the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
