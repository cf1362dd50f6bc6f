"""Polynomial regression of the pseudo descriptor on one pseudo predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllWeightsDegenerate, InsufficientData, SingularNormalEquations

WEIGHT_FLOOR = 1e-8
VARIANCE_FLOOR = 1e-12
RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class PolynomialModel:
    degree: int
    coefficients: np.ndarray  # constant term first
    weighted_rss: float
    loglik: float
    bic: float
    weighted: bool = False

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)


def eq1_weights(j: int, prefix, x_scores, y_scores, eps: float = WEIGHT_FLOOR) -> np.ndarray:
    """Distance-based regression weights for the level-``j`` conditional fit.

    ``w_i`` is the squared distance of observation ``i`` to the already fixed
    coordinates ``prefix`` (first ``j-1`` pseudo predictors) plus the squared
    norm of its descriptor scores off the first principal axis. Observations
    enter the fit with multiplier ``1 / w_i``. Values below ``eps`` are
    clamped; if all of them are, :class:`AllWeightsDegenerate` is raised.
    """
    y_scores = np.asarray(y_scores, dtype=float)
    if y_scores.ndim == 1:
        y_scores = y_scores[:, None]
    n = y_scores.shape[0]
    w = np.zeros(n)
    if j >= 2:
        x_scores = np.asarray(x_scores, dtype=float).reshape(n, -1)
        prefix = np.asarray(prefix, dtype=float).ravel()[: j - 1]
        w += np.sum((x_scores[:, : j - 1] - prefix) ** 2, axis=1)
    if y_scores.shape[1] > 1:
        w += np.sum(y_scores[:, 1:] ** 2, axis=1)
    clamped = w < eps
    if np.all(clamped):
        raise AllWeightsDegenerate("every regression weight is below the floor")
    w[clamped] = eps
    return w


def bic(n: int, k: int, loglik: float) -> float:
    return math.log(n) * k - 2.0 * loglik


def gaussian_loglik(rss: float, n: int) -> float:
    var = max(rss / n, VARIANCE_FLOOR)
    return -0.5 * n * (math.log(2.0 * math.pi * var) + 1.0)


def _solve_wls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    beta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < A.shape[1]:
        m = A.shape[1]
        scale = max(float(np.max(np.abs(A))), 1.0)
        A_aug = np.vstack([A, math.sqrt(RIDGE) * scale * np.eye(m)])
        b_aug = np.concatenate([b, np.zeros(m)])
        beta = np.linalg.lstsq(A_aug, b_aug, rcond=None)[0]
    if not np.all(np.isfinite(beta)):
        raise SingularNormalEquations("weighted least squares has no finite solution")
    return beta


def fit_degree(x, y, degree: int, weights=None) -> PolynomialModel:
    """Weighted least-squares fit of one fixed degree."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    mult = np.ones(n) if weights is None else 1.0 / np.asarray(weights, dtype=float).ravel()
    root = np.sqrt(mult)
    A = np.vander(x, degree + 1, increasing=True)
    beta = _solve_wls(A * root[:, None], y * root)
    resid = y - A @ beta
    rss = float(np.sum(mult * resid**2))
    ll = gaussian_loglik(rss, n)
    return PolynomialModel(degree, beta, rss, ll, bic(n, degree + 2, ll), weights is not None)


def fit_polynomial(x, y, weights=None, max_degree: int = 5,
                   min_resid_dof: int = 1) -> PolynomialModel:
    """Fit degrees ``1..max_degree`` and keep the lowest BIC.

    Degrees without ``m + 1`` distinct ``x`` values are skipped, as are
    degrees leaving fewer than ``min_resid_dof`` residual degrees of freedom
    (a saturated fit has zero residual variance and would always win). BIC
    counts ``m + 2`` parameters (coefficients plus error variance) and ties
    go to the smaller degree.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    if weights is not None and np.shape(weights) != x.shape:
        raise ValueError("weights must match x")
    n = x.shape[0]
    distinct = np.unique(x).size
    if n < 3 or distinct < 2:
        raise InsufficientData(f"need n >= 3 with 2 distinct x values (n={n}, distinct={distinct})")
    best: Optional[PolynomialModel] = None
    for m in range(1, max_degree + 1):
        if distinct < m + 1 or n < m + 1 + min_resid_dof:
            break
        model = fit_degree(x, y, m, weights)
        if best is None or model.bic < best.bic:
            best = model
    return best
