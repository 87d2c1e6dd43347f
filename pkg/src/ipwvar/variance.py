"""Variance estimators for the weighted association-model coefficients.

Three estimators of Cov(beta_hat) are provided:

* naive: the default weighted-least-squares output, sigma2_hat times the
  inverse weighted cross-product. Ignores both the sandwich structure and
  the fact that the weights were estimated.
* robust: outer product of per-individual influence vectors, treating the
  response probabilities as known.
* linearized: same sandwich form, with each influence vector corrected for
  the estimation of the response probabilities (Taylor linearization of the
  weights through the logistic score equation).

Suppressing the correction term in the linearized influence values yields
exactly the robust estimator.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .association import AssociationFit
from .dataset import AnalysisDataset
from .errors import (
    DimensionMismatch,
    KnownProbabilityMisuse,
    SingularGram,
    SingularInformation,
)
from .response import ResponseFit, _information

NAIVE = "naive"
ROBUST = "robust"
LINEARIZED = "linearized"
ESTIMATOR_KINDS = (NAIVE, ROBUST, LINEARIZED)


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    """A p x p covariance matrix for beta_hat, tagged by estimator kind."""

    kind: str
    cov: np.ndarray
    se: np.ndarray


@dataclass(frozen=True, eq=False)
class InfluenceDecomposition:
    """Per-individual influence vectors behind the sandwich estimators.

    Attributes:
        gamma_hat: (q, p) weight-estimation correction coefficients.
        linearized_influence: (n, p) influence vectors including the
            correction for estimated response probabilities.
        robust_influence: (n, p) influence vectors treating the response
            probabilities as known (zero rows for nonrespondents).
    """

    gamma_hat: np.ndarray
    linearized_influence: np.ndarray
    robust_influence: np.ndarray


def _resolve_probabilities(
    rfit_or_p: ResponseFit | np.ndarray, dataset: AnalysisDataset
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Accept a ResponseFit or a raw probability vector.

    Returns (p_hat, information matrix, estimated flag).
    """
    if isinstance(rfit_or_p, ResponseFit):
        p_hat = rfit_or_p.p_hat
        info = rfit_or_p.info_matrix
        estimated = rfit_or_p.estimated
    else:
        p_hat = np.asarray(rfit_or_p, dtype=float).ravel()
        if not np.all((p_hat > 0.0) & (p_hat <= 1.0)):
            raise ValueError("probabilities must lie in (0, 1]")
        info = _information(dataset.X, p_hat)
        estimated = False
    if len(p_hat) != dataset.n:
        raise DimensionMismatch(f"{len(p_hat)} probabilities for {dataset.n} rows")
    return p_hat, info, estimated


def _gram_factor(gram: np.ndarray):
    try:
        return cho_factor(gram)
    except (LinAlgError, ValueError) as exc:
        raise SingularGram(f"weighted cross-product not positive definite: {exc}") from exc


def _sandwich(influence: np.ndarray, n: int, kind: str) -> VarianceEstimate:
    cov = (n / (n - 1.0)) * (influence.T @ influence)
    cov = 0.5 * (cov + cov.T)
    return VarianceEstimate(kind=kind, cov=cov, se=np.sqrt(np.diag(cov)))


def _weighted_score_rows(
    afit: AssociationFit, p_hat: np.ndarray, dataset: AnalysisDataset
) -> np.ndarray:
    # Row i is (r_i / p_hat_i) v_i^{-1} e_i Z_i; zero for nonrespondents.
    w = dataset.r / (p_hat * dataset.v)
    return dataset.z_filled() * (w * afit.residuals)[:, None]


def naive_variance(
    afit: AssociationFit, p_hat: np.ndarray | ResponseFit, dataset: AnalysisDataset
) -> VarianceEstimate:
    """Weighted-least-squares default: sigma2_hat times the inverse gram.

    This is what regression software reports when handed the weights without
    further instruction; it uses neither the sandwich structure nor any
    account of the weight-estimation step.
    """
    _resolve_probabilities(p_hat, dataset)  # validation only; afit.gram already carries the weights
    factor = _gram_factor(afit.gram)
    cov = afit.sigma2_hat * cho_solve(factor, np.eye(afit.gram.shape[0]))
    cov = 0.5 * (cov + cov.T)
    return VarianceEstimate(kind=NAIVE, cov=cov, se=np.sqrt(np.diag(cov)))


def unscaled_full_sample_matrix(
    p_hat: np.ndarray | ResponseFit, dataset: AnalysisDataset
) -> np.ndarray:
    """Diagnostic only: inverse of the full-sample sum of Z_i Z_i' / p_hat_i.

    This is the naive form without the response mask, the variance structure,
    or the residual-variance scale. It is not a usable variance estimate (its
    units are wrong); it is exposed for side-by-side inspection against
    naive_variance. Requires Z observed for every individual.
    """
    p_vec, _, _ = _resolve_probabilities(p_hat, dataset)
    if not np.all(np.isfinite(dataset.Z)):
        raise ValueError("full-sample diagnostic needs Z observed for all individuals")
    mat = (dataset.Z / p_vec[:, None]).T @ dataset.Z
    return cho_solve(_gram_factor(mat), np.eye(mat.shape[0]))


def gamma_hat(
    afit: AssociationFit,
    rfit_or_p: ResponseFit | np.ndarray,
    dataset: AnalysisDataset,
) -> np.ndarray:
    """Weight-estimation correction coefficients, a q x p matrix.

    Solves J gamma = sum_j r_j (1/p_hat_j - 1) v_j^{-1} e_j X_j Z_j', where J
    is the response-model information sum p_hat_j (1 - p_hat_j) X_j X_j'.
    Only respondents feed the right-hand side; everyone feeds J. When the
    right-hand side vanishes (all probabilities 1, or a perfect fit) the
    correction is exactly zero and J is never inverted.
    """
    p_hat, info, _ = _resolve_probabilities(rfit_or_p, dataset)
    coef = dataset.r * (1.0 / p_hat - 1.0) / dataset.v * afit.residuals
    right = dataset.X.T @ (coef[:, None] * dataset.z_filled())
    if not right.any():
        return np.zeros_like(right)
    try:
        return cho_solve(cho_factor(info), right)
    except (LinAlgError, ValueError) as exc:
        raise SingularInformation(f"information matrix not invertible: {exc}") from exc


def robust_variance(
    afit: AssociationFit,
    rfit_or_p: ResponseFit | np.ndarray,
    dataset: AnalysisDataset,
) -> tuple[VarianceEstimate, np.ndarray]:
    """Sandwich estimator treating the response probabilities as known.

    Returns the estimate and the (n, p) influence vectors; nonrespondents
    contribute zero rows.
    """
    p_hat, _, _ = _resolve_probabilities(rfit_or_p, dataset)
    factor = _gram_factor(afit.gram)
    rows = _weighted_score_rows(afit, p_hat, dataset)
    influence = cho_solve(factor, rows.T).T
    return _sandwich(influence, dataset.n, ROBUST), influence


def linearized_variance(
    afit: AssociationFit,
    rfit_or_p: ResponseFit | np.ndarray,
    dataset: AnalysisDataset,
) -> tuple[VarianceEstimate, InfluenceDecomposition]:
    """Sandwich estimator corrected for the estimation of the weights.

    Each respondent's weighted score row is shifted by
    -(r_i - p_hat_i) gamma_hat' X_i before conjugation by the inverse gram;
    nonrespondents therefore carry nonzero influence. The fitted response
    probabilities must come from solving the logistic score equation on this
    sample; a KnownProbabilityMisuse warning is issued otherwise, and the
    result then collapses onto the robust estimator whenever the correction
    coefficients vanish.
    """
    p_hat, _, estimated = _resolve_probabilities(rfit_or_p, dataset)
    if not estimated:
        warnings.warn(
            "linearized variance with externally supplied probabilities: the "
            "weight-estimation correction assumes the probabilities were fitted "
            "on this sample",
            KnownProbabilityMisuse,
            stacklevel=2,
        )
    g = gamma_hat(afit, rfit_or_p, dataset)
    factor = _gram_factor(afit.gram)
    rows = _weighted_score_rows(afit, p_hat, dataset)
    correction = (dataset.r - p_hat)[:, None] * (dataset.X @ g)
    lin_influence = cho_solve(factor, (rows - correction).T).T
    rob_influence = cho_solve(factor, rows.T).T
    estimate = _sandwich(lin_influence, dataset.n, LINEARIZED)
    decomposition = InfluenceDecomposition(
        gamma_hat=g,
        linearized_influence=lin_influence,
        robust_influence=rob_influence,
    )
    return estimate, decomposition
