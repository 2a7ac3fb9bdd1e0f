import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from modest.mdp import TabularMdp

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_mdp(S, A, seed, dense=True):
    """Dense Dirichlet rows make every stationary policy ergodic."""
    rng = np.random.default_rng(seed)
    if dense:
        p = rng.dirichlet(np.ones(S), size=(S, A))
    else:
        p = np.zeros((S, A, S))
        for s in range(S):
            for a in range(A):
                k = rng.integers(1, S + 1)
                idx = rng.choice(S, size=k, replace=False)
                p[s, a, idx] = rng.dirichlet(np.ones(k))
    return TabularMdp(p, name=f"random{S}x{A}:{seed}")


def two_state_cycle():
    p = np.zeros((2, 2, 2))
    p[0, 0, 1] = p[1, 0, 0] = 1.0   # action 0 moves
    p[0, 1, 0] = p[1, 1, 1] = 1.0   # action 1 stays
    return TabularMdp(p, name="cycle2")


@pytest.fixture
def cycle2():
    return two_state_cycle()


def small_corpus():
    """2- and 3-state ergodic MDPs used by the enumeration oracles."""
    return [random_mdp(S, A, seed) for S in (2, 3) for A in (2, 3) for seed in range(3)]


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
