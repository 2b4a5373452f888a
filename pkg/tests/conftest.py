"""Shared fixtures: the worked-example networks and their property."""

import pathlib

import pytest

from incremark.model import LinearConstraint, Network, SafetyProperty

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"

BOX = ((-1.0, 1.0), (-1.0, 1.0))


def _demo_net() -> Network:
    return Network([[[0.2, -0.7], [0.8, -0.8]], [[0.4, 0.6]]], [[-0.1, 0.0], [0.0]])


def _fprime() -> Network:
    return Network([[[0.2, -0.7], [0.9, -0.7]], [[0.4, 0.6]]], [[-0.1, 0.0], [0.0]])


def _fdoubleprime() -> Network:
    return Network([[[0.34, -1.34], [0.16, -0.69]], [[0.4, 0.6]]], [[-0.05, -0.33], [0.0]])


def _demo_prop() -> SafetyProperty:
    return SafetyProperty(BOX, (LinearConstraint((1.0,), 0.3),))


@pytest.fixture
def demo_net() -> Network:
    return _demo_net()


@pytest.fixture
def fprime() -> Network:
    return _fprime()


@pytest.fixture
def fdoubleprime() -> Network:
    return _fdoubleprime()


@pytest.fixture
def demo_prop() -> SafetyProperty:
    return _demo_prop()


@pytest.fixture
def unsat_prop() -> SafetyProperty:
    # threshold above the true maximum (1.28), interval-refuted outright
    return SafetyProperty(BOX, (LinearConstraint((1.0,), 2.0),))


@pytest.fixture
def data_dir() -> pathlib.Path:
    return DATA


# Pass/fail lines recorded by the acceptance tests; shown after the run so
# they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
