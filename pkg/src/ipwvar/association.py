"""Inverse-probability-weighted linear association model.

Respondents are reweighted by 1/p_hat and by the inverse of the known
variance structure v; the coefficient estimate solves the weighted normal
equations exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dataset import AnalysisDataset
from .errors import DimensionMismatch, SingularGram


@dataclass(frozen=True, eq=False)
class AssociationFit:
    """Weighted linear regression fitted on respondents.

    Attributes:
        beta_hat: (p,) coefficient estimate.
        residuals: (n,) outcome minus fitted value; zero where r == 0 so the
            vector can ride inside full-sample sums that carry an r factor.
        sigma2_hat: weighted residual variance; consumed only by the naive
            variance estimator.
        gram: (p, p) sum of (r_i / p_hat_i) v_i^{-1} Z_i Z_i'.
    """

    beta_hat: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    gram: np.ndarray


def fit_weighted_linear(dataset: AnalysisDataset, p_hat: np.ndarray) -> AssociationFit:
    """Solve the weighted normal equations for the association model.

    The estimating equation sum_i (r_i / p_hat_i) v_i^{-1} Z_i (y_i - Z_i' beta) = 0
    is solved directly: form the p x p weighted cross-product on respondents
    and factorize it (p is small, so normal equations are numerically fine).

    Raises:
        SingularGram: respondent design is rank-deficient.
        DimensionMismatch: p_hat length differs from the sample size.
    """
    p_hat = np.asarray(p_hat, dtype=float).ravel()
    if len(p_hat) != dataset.n:
        raise DimensionMismatch(f"p_hat length {len(p_hat)} != n = {dataset.n}")
    if not np.all(p_hat > 0.0):
        raise ValueError("p_hat must be strictly positive")

    resp = dataset.respondent_mask
    Zr = dataset.Z[resp]
    yr = dataset.y[resp]
    wr = 1.0 / (p_hat[resp] * dataset.v[resp])  # r_i/p_hat_i * v_i^{-1} on respondents
    p = dataset.Z.shape[1]

    gram = (Zr * wr[:, None]).T @ Zr
    rhs = Zr.T @ (wr * yr)
    try:
        factor = cho_factor(gram)
    except (LinAlgError, ValueError) as exc:
        raise SingularGram(f"weighted cross-product not positive definite: {exc}") from exc
    beta_hat = cho_solve(factor, rhs)

    residuals = np.zeros(dataset.n)
    residuals[resp] = yr - Zr @ beta_hat

    ipw_sum = float((1.0 / p_hat[resp]).sum())
    dof = ipw_sum - p
    if dof > 0:
        sigma2_hat = float(((1.0 / p_hat[resp]) / dataset.v[resp] * residuals[resp] ** 2).sum() / dof)
    else:
        sigma2_hat = float("nan")

    return AssociationFit(
        beta_hat=beta_hat,
        residuals=residuals,
        sigma2_hat=sigma2_hat,
        gram=gram,
    )
