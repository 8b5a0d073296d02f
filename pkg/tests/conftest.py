import numpy as np
import pytest

from pareto_fuse.datagen import Batch, ObjectiveSet, generate_universe, stream_impressions


@pytest.fixture(scope="session")
def small_universe():
    return generate_universe(101, n_users=200, n_items=120, latent_dim=8)


@pytest.fixture(scope="session")
def small_stream(small_universe):
    logs = stream_impressions(small_universe, 202, 4000)
    return Batch.from_logs(logs, small_universe.objectives)


@pytest.fixture(scope="session")
def objectives(small_universe):
    return small_universe.objectives


def finite_difference(f, params: dict, h: float = 1e-4) -> dict:
    """Central finite differences of a scalar function of named arrays."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-12)
    return float(np.abs(a - b).max(initial=0.0) / denom)
