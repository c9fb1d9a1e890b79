import numpy as np
import pytest

from manela.graph import Network, generate_sbm


def path_graph(n):
    return Network.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Network.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves):
    return Network.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def triangle_pendant():
    # triangle 0-1-2 with pendant 3 hanging off node 2 (the junction)
    return Network.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])


def toy_graphs():
    """Three fixed small graphs (<= 12 nodes) used by sampler checks."""
    lollipop = Network.from_edges(7, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6)])
    barbell = Network.from_edges(10, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6),
                                      (6, 7), (6, 8), (7, 8), (8, 9), (9, 7)])
    irregular = Network.from_edges(12, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (2, 5), (3, 6), (4, 7),
                                        (5, 8), (6, 8), (7, 9), (8, 10), (9, 10), (10, 11), (11, 0)])
    return {"triangle_pendant": (triangle_pendant(), 2), "lollipop": (lollipop, 3),
            "barbell": (barbell, 4), "irregular": (irregular, 0)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_sbm():
    return generate_sbm(120, 3, 0.2, 0.02, np.random.default_rng(7))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
