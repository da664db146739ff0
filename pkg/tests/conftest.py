import numpy as np
import pytest

from walkforge import graph as gr


@pytest.fixture
def triangle():
    return gr.from_edges([0, 1, 2], [1, 2, 0], 3)


@pytest.fixture
def small_power_law():
    g = gr.power_law_graph(1000, 6, seed=3)
    return g.with_weights(gr.synthetic_weights(g.edge_count, 3)).with_labels(
        gr.synthetic_labels(g.edge_count, 5, 3))


def write_edges(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture
def edge_file(tmp_path):
    return lambda text, name="g.txt": write_edges(tmp_path, text, name)


def freq(idx, n):
    return np.bincount(np.asarray(idx), minlength=n) / len(idx)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
