import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from helpers import example_instance  # noqa: E402


@pytest.fixture(scope="session")
def example():
    return example_instance()


@pytest.fixture(scope="session")
def example_solution(example):
    from blockeig import SolveRequest, solve

    return solve(SolveRequest(example))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
