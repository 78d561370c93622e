import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zaremba import CircularArc, DomainBoundary, Segment

settings.register_profile(
    "zaremba", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("zaremba")

# acceptance lines collected by tests/test_acceptance.py, echoed in the summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def unit_square():
    return DomainBoundary.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture
def right_triangle():
    # corners (0,0), (2,0), (0,1); arcs: bottom leg, hypotenuse, short leg
    return DomainBoundary.polygon([(0, 0), (2, 0), (0, 1)])


@pytest.fixture
def unit_disk():
    return DomainBoundary(
        [CircularArc((0, 0), 1.0, 0.0, math.pi), CircularArc((0, 0), 1.0, math.pi, 2 * math.pi)]
    )


@pytest.fixture
def d_shape():
    """Rectangle [-1,1]x[-1,0] capped by the upper unit half circle (tangent joins)."""
    return DomainBoundary(
        [
            Segment((-1, -1), (1, -1)),
            Segment((1, -1), (1, 0)),
            CircularArc((0, 0), 1.0, 0.0, math.pi),
            Segment((-1, 0), (-1, -1)),
        ]
    )


def regular_polygon(n, radius=1.0, phase=0.0):
    k = np.arange(n)
    ang = phase + 2 * math.pi * k / n
    return DomainBoundary.polygon(np.c_[radius * np.cos(ang), radius * np.sin(ang)])
