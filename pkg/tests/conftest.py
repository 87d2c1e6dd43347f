import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.special import expit

from ipwvar import AnalysisDataset

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_instance(seed: int, n: int | None = None, q: int | None = None, p: int | None = None):
    """A small, well-conditioned dataset plus the probabilities used to draw it.

    Probabilities are kept inside (0.1, 0.9) and at least p+1 respondents and
    one nonrespondent are guaranteed, so every estimator is well defined.
    """
    rng = np.random.default_rng(seed)
    q = q or int(rng.integers(1, 4))
    p = p or int(rng.integers(1, 4))
    n = n or int(rng.integers(max(p + 3, q + 3, 6), 21))
    X = np.column_stack([np.ones(n), rng.standard_normal((n, q - 1))]) if q > 1 else np.ones((n, 1))
    Z = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))]) if p > 1 else np.ones((n, 1))
    p_resp = rng.uniform(0.1, 0.9, size=n)
    while True:
        r = (rng.random(n) < p_resp).astype(float)
        if p < r.sum() < n:
            break
    y = rng.standard_normal(n) + Z @ rng.standard_normal(p)
    y = np.where(r == 1.0, y, np.nan)
    v = rng.uniform(0.5, 2.0, size=n)
    dataset = AnalysisDataset(X=X, Z=Z, y=y, r=r, v=v)
    return dataset, p_resp


def logistic_sample(seed: int, n: int, alpha: np.ndarray):
    """Design, indicator draw, and true probabilities from a logistic model."""
    rng = np.random.default_rng(seed)
    q = len(alpha)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, q - 1))])
    p_true = expit(X @ alpha)
    r = (rng.random(n) < p_true).astype(float)
    return X, r, p_true


@pytest.fixture
def six_row_instance():
    """Fixed mixed-weight instance used by the closed-form oracle tests."""
    n = 6
    X = np.column_stack([np.ones(n), np.array([0.2, -0.4, 1.0, 0.1, -0.9, 0.5])])
    Z = np.column_stack([np.ones(n), np.array([0.5, -1.0, 2.0, 0.0, 1.0, -0.5])])
    y = np.array([1.2, -0.3, np.nan, 2.0, 0.7, -1.1])
    r = np.array([1.0, 1.0, 0.0, 1.0, 1.0, 1.0])
    p_hat = np.array([0.8, 0.5, 0.9, 0.6, 0.75, 0.4])
    v = np.array([1.0, 2.0, 1.0, 0.5, 1.0, 1.25])
    return AnalysisDataset(X=X, Z=Z, y=y, r=r, v=v), p_hat
