import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240801))


def brute_knn(points: np.ndarray, x: np.ndarray, k: int):
    """Independent oracle: full distance scan, sort by (distance, index)."""
    d = np.sqrt(((points - x) ** 2).sum(axis=1))
    order = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
    return np.asarray(order), d[list(order)]
