from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from byzcent.candidates import Layout

ROOT = Path(__file__).resolve().parent.parent
MNIST_DIR = ROOT / "data" / "mnist"


@pytest.fixture
def layout_a():
    """n=4, t=1, values 0, 1, 2, 10 in one dimension."""
    return Layout(4, 1, np.array([[0.0], [1.0], [2.0], [10.0]]))


@st.composite
def layouts(draw, max_n=8, max_d=4, min_t=0, full=False):
    n = draw(st.integers(1, max_n))
    t = draw(st.integers(min(min_t, (n - 1) // 3), (n - 1) // 3))
    d = draw(st.integers(1, max_d))
    m = n if full else draw(st.integers(n - t, n))
    vals = draw(
        st.lists(
            st.lists(st.floats(-50, 50, allow_nan=False, width=64), min_size=d, max_size=d),
            min_size=m,
            max_size=m,
        )
    )
    ids = draw(st.permutations(range(n)))[:m]
    return Layout(n, t, np.array(vals), np.array(ids))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
