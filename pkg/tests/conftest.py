import numpy as np
import pytest

from refillmatch.core import OnlineInstance, RefillSchedule

# acceptance lines collected across the session and echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_instance(rng: np.random.Generator, n_max=5, T_max=12, p_edge=None, refill="mixed"):
    """Small instance with random edges, refills and cap; used by oracle and fuzz tests."""
    n = int(rng.integers(1, n_max + 1))
    T = int(rng.integers(1, T_max + 1))
    p = rng.uniform(0.15, 0.8) if p_edge is None else p_edge
    nbs = [tuple(int(u) for u in np.flatnonzero(rng.random(n) < p)) for _ in range(T)]
    kind = rng.choice(["periodic", "explicit", "none", "bernoulli"]) if refill == "mixed" else refill
    if kind == "periodic":
        sched = RefillSchedule.periodic(int(rng.integers(1, T + 1)))
    elif kind == "explicit":
        mat = (rng.random((n, T)) < rng.uniform(0.05, 0.4)) * rng.integers(1, 3, size=(n, T))
        sched = RefillSchedule.explicit(mat)
    elif kind == "bernoulli":
        sched = RefillSchedule.bernoulli(float(rng.uniform(0, n)), int(rng.integers(1 << 30)))
    else:
        sched = RefillSchedule.none()
    cap = None if rng.random() < 0.5 else int(rng.integers(1, 4))
    b0 = int(rng.integers(0, (cap if cap is not None else 3) + 1))
    return OnlineInstance(n, T, nbs, sched, b0, cap)


@pytest.fixture
def make_instance():
    return random_instance


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
