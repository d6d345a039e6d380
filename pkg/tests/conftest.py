import contextlib
import time

import numpy as np
import pytest
from hypothesis import strategies as st

from aptsp.instance import Instance

ACCEPTANCE_LINES: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line for an acceptance criterion; failures still raise."""
    start = time.perf_counter()
    details: list[str] = []
    try:
        yield details
    except BaseException:
        ACCEPTANCE_LINES.append(_line(number, "FAIL", title, start, details))
        raise
    ACCEPTANCE_LINES.append(_line(number, "PASS", title, start, details))


def _line(number, status, title, start, details):
    extra = f" [{'; '.join(details)}]" if details else ""
    return f"criterion {number:>2}: {status} {title} ({time.perf_counter() - start:.1f}s){extra}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


def random_instance(rng: np.random.Generator, n: int, depot: int | None = 0,
                    p_low: float = 0.05, p_high: float = 0.95) -> Instance:
    return Instance.random_euclidean(n, rng, depot=depot, p_low=p_low, p_high=p_high)


@st.composite
def instances(draw, min_n=2, max_n=7, depot=None):
    """Euclidean instances from drawn points and probabilities."""
    n = draw(st.integers(min_n, max_n))
    coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    pts = np.array(draw(st.lists(st.tuples(coords, coords), min_size=n, max_size=n)))
    p = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    if depot is not None:
        p[depot] = 1.0
    return Instance.from_points(pts, p, depot)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
