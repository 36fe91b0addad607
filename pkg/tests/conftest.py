import numpy as np
import pytest

from pdama import BoxSet, ProblemSpec, QuadraticObjective, reformulate_qp
from pdama.bench import InstanceRecipe, generate


def scalar_spec(D=1.0, q=1.0, lo=0.0, hi=0.5, r=None):
    """min 1/2 (D u - q)^2 with u - v = 0, v in [lo, hi]."""
    return reformulate_qp([D], [q], [[1.0]], [lo], [hi], r)


def seeded_recipes(strongly_convex, count=10):
    return [
        InstanceRecipe(seed=s, n=2 + s % 3, p1=2 + (s // 3) % 3, strongly_convex=strongly_convex)
        for s in range(count)
    ]


def seeded_specs(strongly_convex, count=10):
    return [generate(r).to_spec() for r in seeded_recipes(strongly_convex, count)]


@pytest.fixture
def scalar():
    return scalar_spec()


@pytest.fixture
def box_spec():
    """Small non-slack spec with bounded U, B = 2 I."""
    A = np.array([[1.0, -2.0, 0.5], [0.3, 1.0, 1.5]])
    return ProblemSpec(
        A=A,
        B=2.0 * np.eye(2),
        c=np.array([0.2, -0.1]),
        g=QuadraticObjective(np.array([1.0, 0.0, 0.5]), np.array([0.5, -1.0, 2.0])),
        U=BoxSet(np.array([-1.0, -2.0, 0.0]), np.array([1.0, 1.0, 3.0])),
        V=BoxSet(np.array([-1.0, -0.5]), np.array([1.0, 2.0])),
    )


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
