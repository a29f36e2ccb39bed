import numpy as np
import pytest

from bnppc.data import PanelData
from bnppc.simulate import Dimensions, simulate_panel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    """8 units x 4 periods x 3 categories, 1 cluster covariate, 1 global."""
    data, truth = simulate_panel(Dimensions(8, 4, 3, 1, 1), rng, trials=10)
    return data, truth


@pytest.fixture
def flat_panel():
    """Zero-period panel: likelihood is constant, allocation targets the CRP."""
    n = 6
    return PanelData(
        y=np.zeros((n, 0, 2), dtype=np.int64),
        trials=np.zeros((n, 0), dtype=np.int64),
        x_cluster=np.zeros((n, 0, 1)),
        x_global=np.zeros((n, 0, 0)),
    )


def rgs_partitions(n):
    """All set partitions of range(n) as restricted-growth label arrays."""
    out = [[0]]
    for _ in range(n - 1):
        nxt = []
        for p in out:
            top = max(p)
            for v in range(top + 2):
                nxt.append(p + [v])
        out = nxt
    return [np.array(p, dtype=np.int64) for p in out]
