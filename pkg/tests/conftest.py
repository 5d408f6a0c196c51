import numpy as np
import pytest

from selinf.linalg import Dataset


def make_dataset(n, p, seed, intercept=True, signal=None, rho=0.0):
    """Gaussian design (optionally equicorrelated) with an optional intercept column."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    if rho:
        Z = np.sqrt(rho) * rng.standard_normal((n, 1)) + np.sqrt(1 - rho) * Z
    beta = np.zeros(p) if signal is None else np.resize(np.asarray(signal, float), p)
    y = Z @ beta + rng.standard_normal(n)
    if intercept:
        X = np.column_stack([np.ones(n), Z])
        names = ("(Intercept)",) + tuple(f"x{j + 1}" for j in range(p))
    else:
        X = Z
        names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(y, X, names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
