"""Container for an attrition analysis sample.

Holds the fully observed response-model design, the association-model design
and outcome (observed at least for respondents), the response indicator, and
the known variance structure of the association model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True, eq=False)
class AnalysisDataset:
    """One analysis sample of n baseline individuals.

    Attributes:
        X: (n, q) response-model design matrix, fully observed for everyone
           (nonrespondents included; the variance correction needs their rows).
           By convention the first column is an all-ones intercept.
        Z: (n, p) association-model design matrix. Rows may contain NaN where
           r == 0; they are never read there.
        y: (n,) outcome, NaN where r == 0.
        r: (n,) response indicator, each entry 0 or 1.
        v: (n,) strictly positive variance structure of the association model
           (residual variance is proportional to v_i). Defaults to all ones.
    """

    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    r: np.ndarray
    v: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        r = np.asarray(self.r, dtype=float).ravel()
        v = np.ones(len(r)) if self.v is None else np.asarray(self.v, dtype=float).ravel()
        n = X.shape[0]
        if Z.shape[0] != n or len(y) != n or len(r) != n or len(v) != n:
            raise DimensionMismatch(
                f"row counts disagree: X {X.shape[0]}, Z {Z.shape[0]}, "
                f"y {len(y)}, r {len(r)}, v {len(v)}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("response-model design must be fully observed and finite")
        if not np.all((r == 0.0) | (r == 1.0)):
            raise ValueError("response indicator entries must be 0 or 1")
        if not np.all(v > 0.0):
            raise ValueError("variance structure entries must be strictly positive")
        resp = r == 1.0
        if not np.all(np.isfinite(y[resp])):
            raise ValueError("outcome must be observed and finite for every respondent")
        if not np.all(np.isfinite(Z[resp])):
            raise ValueError("association design must be observed and finite for every respondent")
        for name, arr in (("X", X), ("Z", Z), ("y", y), ("r", r), ("v", v)):
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def respondent_mask(self) -> np.ndarray:
        return self.r == 1.0

    @property
    def n_respondents(self) -> int:
        return int(self.r.sum())

    def z_filled(self) -> np.ndarray:
        """Z with nonrespondent rows zeroed, safe inside sums carrying an r factor."""
        out = np.where(self.respondent_mask[:, None], self.Z, 0.0)
        return out

    def y_filled(self) -> np.ndarray:
        """y with nonrespondent entries zeroed, safe inside sums carrying an r factor."""
        return np.where(self.respondent_mask, self.y, 0.0)
