"""Logistic response model and inverse-probability weights.

The probability that individual i responds is modeled as
expit(X_i' alpha); alpha is estimated by driving the logistic score
sum_i X_i (r_i - expit(X_i' alpha)) to zero with a safeguarded Newton
iteration. Weights are the reciprocals of the fitted probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import AnalysisDataset
from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    NonConvergence,
    SingularInformation,
)


@dataclass(frozen=True)
class FitOptions:
    """Knobs for the Newton solve of the logistic score equation."""

    tol: float = 1e-10          # max-norm of the score at convergence
    max_iter: int = 50
    max_halvings: int = 20      # step halvings per iteration if loglik drops
    prob_clamp: float = 1e-10   # fitted probabilities clipped to [clamp, 1-clamp]


@dataclass(frozen=True, eq=False)
class ResponseFit:
    """Fitted response model.

    Attributes:
        alpha_hat: (q,) coefficient estimate, or None when the probabilities
            were supplied externally rather than fitted.
        p_hat: (n,) fitted response probabilities, clamped away from 0 and 1.
        info_matrix: (q, q) sum of p_hat*(1-p_hat) * X_i X_i'.
        converged: whether the score tolerance was met.
        iterations: Newton iterations used.
        final_gradient_norm: max-norm of the score at exit.
        n_clamped: how many fitted probabilities the clamp actually changed.
        estimated: True when p_hat came from solving the score equation on
            this sample; False for externally supplied probabilities.
    """

    alpha_hat: np.ndarray | None
    p_hat: np.ndarray
    info_matrix: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    n_clamped: int = 0
    estimated: bool = True


def _bernoulli_loglik(eta: np.ndarray, r: np.ndarray) -> float:
    # log L = sum r*eta - log(1 + exp(eta)), computed without overflow
    return float(r @ eta - np.logaddexp(0.0, eta).sum())


def _information(X: np.ndarray, p: np.ndarray) -> np.ndarray:
    return (X * (p * (1.0 - p))[:, None]).T @ X


def fit_response(dataset: AnalysisDataset, options: FitOptions | None = None) -> ResponseFit:
    """Fit the logistic response model by Newton iteration on the score.

    Raises:
        DegenerateResponse: all response indicators are equal.
        SingularInformation: design is rank-deficient or a Newton step
            matrix cannot be inverted. Columns are never dropped silently.
        NonConvergence: iteration cap reached with the score above
            tolerance; with a diverging coefficient norm this indicates
            separation, and the weights would be meaningless.
    """
    opts = options or FitOptions()
    X, r = dataset.X, dataset.r
    n, q = X.shape
    n_resp = dataset.n_respondents
    if n_resp == 0 or n_resp == n:
        raise DegenerateResponse(
            f"need both respondents and nonrespondents, got {n_resp} of {n} responding"
        )
    if q > n:
        raise DimensionMismatch(f"more response-model columns ({q}) than rows ({n})")
    if np.linalg.matrix_rank(X) < q:
        raise SingularInformation("response-model design is rank-deficient")

    alpha = np.zeros(q)
    loglik = _bernoulli_loglik(X @ alpha, r)
    grad_norm = np.inf
    iterations = 0
    converged = False
    for iterations in range(opts.max_iter + 1):
        p = expit(X @ alpha)
        score = X.T @ (r - p)
        grad_norm = float(np.max(np.abs(score)))
        if grad_norm <= opts.tol:
            converged = True
            break
        if iterations == opts.max_iter:
            break
        info = _information(X, p)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise SingularInformation(f"Newton step matrix not invertible: {exc}") from exc
        # Halve on a loglik decrease, with slack for rounding noise near the
        # optimum (the true improvement of the last steps underflows).
        scale = 1.0
        slack = 1e-10 * (1.0 + abs(loglik))
        for _ in range(opts.max_halvings):
            candidate = _bernoulli_loglik(X @ (alpha + scale * step), r)
            if candidate >= loglik - slack:
                break
            scale *= 0.5
        alpha = alpha + scale * step
        loglik = _bernoulli_loglik(X @ alpha, r)

    if not converged:
        raise NonConvergence(
            f"score max-norm {grad_norm:.3e} after {opts.max_iter} iterations "
            f"(|alpha|_max = {np.max(np.abs(alpha)):.3e}; a large value suggests separation)"
        )

    p_raw = expit(X @ alpha)
    # A finite maximizer leaves residual mass on both sides; when the fitted
    # probabilities reproduce the indicator to rounding the maximizer ran off
    # to infinity (separation) and the score only vanished by saturation.
    if np.max(np.abs(r - p_raw)) < 1e-6:
        raise NonConvergence(
            f"fitted probabilities reproduce the response indicator exactly "
            f"(|alpha|_max = {np.max(np.abs(alpha)):.3e}); data are separated"
        )
    p_hat = np.clip(p_raw, opts.prob_clamp, 1.0 - opts.prob_clamp)
    n_clamped = int(np.count_nonzero(p_hat != p_raw))
    return ResponseFit(
        alpha_hat=alpha,
        p_hat=p_hat,
        info_matrix=_information(X, p_hat),
        converged=True,
        iterations=iterations,
        final_gradient_norm=grad_norm,
        n_clamped=n_clamped,
        estimated=True,
    )


def known_probability_fit(p: np.ndarray, dataset: AnalysisDataset) -> ResponseFit:
    """Wrap externally known response probabilities in a ResponseFit.

    Use when probabilities come from outside the sample (a design, an oracle,
    a sensitivity analysis) instead of from fit_response. Downstream variance
    code treats such probabilities as known constants.
    """
    p = np.asarray(p, dtype=float).ravel()
    if len(p) != dataset.n:
        raise DimensionMismatch(f"probability vector length {len(p)} != n = {dataset.n}")
    if not np.all((p > 0.0) & (p <= 1.0)):
        raise ValueError("probabilities must lie in (0, 1]")
    return ResponseFit(
        alpha_hat=None,
        p_hat=p,
        info_matrix=_information(dataset.X, p),
        converged=True,
        iterations=0,
        final_gradient_norm=float("nan"),
        n_clamped=0,
        estimated=False,
    )


def ipw_weights(fit: ResponseFit, dataset: AnalysisDataset) -> np.ndarray:
    """Inverse-probability weights 1/p_hat for all n individuals.

    Nonrespondent weights are computed too; the association fit ignores them,
    the variance correction does not.
    """
    if len(fit.p_hat) != dataset.n:
        raise DimensionMismatch(f"fit has {len(fit.p_hat)} probabilities, dataset has {dataset.n} rows")
    return 1.0 / fit.p_hat


def linearized_weight_approx(
    p_star: np.ndarray, X: np.ndarray, r: np.ndarray
) -> np.ndarray:
    """First-order approximation of refitted weights around known probabilities.

    For true probabilities p*, the weight 1/p_hat obtained by refitting the
    logistic model is approximately

        1/p*_i - (1/p*_i - 1) X_i' J(p*)^{-1} s(p*),

    with J(p*) the information sum p*_j (1-p*_j) X_j X_j' and s(p*) the score
    sum (r_j - p*_j) X_j. This is a validation device for the variance
    linearization; production code always uses exact refitted weights.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p_star = np.asarray(p_star, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    n, _ = X.shape
    if len(p_star) != n or len(r) != n:
        raise DimensionMismatch("p_star, X, and r must share their first dimension")
    if not np.all((p_star > 0.0) & (p_star < 1.0)):
        raise ValueError("p_star must lie strictly inside (0, 1)")
    score = X.T @ (r - p_star)
    info = _information(X, p_star)
    try:
        shift = np.linalg.solve(info, score)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(f"information matrix not invertible: {exc}") from exc
    return 1.0 / p_star - (1.0 / p_star - 1.0) * (X @ shift)
