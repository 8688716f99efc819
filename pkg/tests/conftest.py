import warnings

import pytest

from dhymflow import FlowConfig, GeometryParams, run

ACCEPTANCE_LINES: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture(scope="session")
def flagship_geometry():
    return GeometryParams(3, 3, 18, 3)


@pytest.fixture(scope="session")
def flagship_run(flagship_geometry):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run(flagship_geometry, cfg=FlowConfig(n_interior=400, delta=0.05))


@pytest.fixture(scope="session")
def stable_run():
    return run(GeometryParams(3, 3, 18, 5), cfg=FlowConfig(n_interior=400, delta=0.05))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
