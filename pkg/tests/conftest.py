import pathlib

import numpy as np
import pytest

from bspec.model import BoundaryConditionSet, normalize_conditions

PROBLEMS = pathlib.Path(__file__).resolve().parent.parent / "problems"


def rows(*r):
    return np.array(r, dtype=complex)


@pytest.fixture
def problems_dir():
    return PROBLEMS


@pytest.fixture
def dirichlet():
    return normalize_conditions(rows([1, 0, 0, 0], [0, 0, 1, 0]), 2)


@pytest.fixture
def cauchy0():
    return normalize_conditions(rows([1, 0, 0, 0], [0, 1, 0, 0]), 2)


@pytest.fixture
def periodic():
    return normalize_conditions(rows([1, 0, -1, 0], [0, 1, 0, -1]), 2)


def random_conditions(n, seed):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, 2 * n)) + 1j * rng.standard_normal((n, 2 * n))
    return normalize_conditions(U, n)


def dirichlet_bc():
    return BoundaryConditionSet.from_leading(2, {0: (np.array([[1], [0]]), np.array([[0], [1]]))})


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
