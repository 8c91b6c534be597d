import numpy as np
import pytest

from src.core.recovery import ProblemSpec, Scenario


@pytest.fixture
def e1_spec():
    """Lambda = [1 0], R = I, S = diag(1, 2), Q = I."""
    return ProblemSpec(
        Lambda=np.array([[1.0, 0.0]]),
        Q=np.eye(2),
        R=np.eye(2),
        S=np.diag([1.0, 2.0]),
    )


def _random_spec(seed, n=4, m=2, q=None, scenario=Scenario.EXACT, epsilon=1.0, eta=1.0):
    rng = np.random.default_rng(seed)
    q = n if q is None else q
    s_cols = m if scenario in (Scenario.L2, Scenario.MIXED) else n
    return ProblemSpec(
        Lambda=rng.standard_normal((m, n)),
        Q=rng.standard_normal((q, n)),
        R=rng.standard_normal((n, n)),
        S=rng.standard_normal((s_cols, s_cols)),
        epsilon=epsilon,
        eta=eta,
        scenario=scenario,
    )


@pytest.fixture
def random_spec():
    return _random_spec
