import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from conclust.model import Instance

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def path_instance(n=4, k=2):
    """Unit-spaced points on a line joined as a path."""
    return Instance.from_coords([[i] for i in range(n)], "l1", [(i, i + 1) for i in range(n - 1)], k)


def twins_instance(k=2):
    """Two co-located pairs far apart, each pair joined by an edge."""
    return Instance.from_coords([[0], [0], [9], [9]], "l1", [(0, 1), (2, 3)], k)


def matrix_instance(dist, edges, k):
    return Instance.build(len(dist), edges, np.asarray(dist, dtype=float), k)


@pytest.fixture
def path4():
    return path_instance()


@pytest.fixture
def twins():
    return twins_instance()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
