import numpy as np
import pytest

from dyncorr.matrix import ExpressionMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_matrix(values, standardized=False, prefix="g"):
    values = np.asarray(values, dtype=np.float64)
    p, n = values.shape
    return ExpressionMatrix(
        [f"{prefix}{i}" for i in range(p)],
        [f"s{j}" for j in range(n)],
        values,
        standardized=standardized,
    )


def standardized_matrix(rng, p, n):
    values = rng.normal(size=(p, n))
    values = (values - values.mean(axis=1, keepdims=True)) / values.std(axis=1, ddof=1, keepdims=True)
    return make_matrix(values, standardized=True)
