"""Dimension reduction on both sides of the problem.

Descriptors are rotated by a PCA whose origin is the target rather than the
sample mean, so the first axis captures the largest squared deviation from
the target. Predictors are reduced with PLS1 against the first PCA score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dataspace import ParameterSpace, StandardizationStats
from .errors import InsufficientData, ZeroWeight


@dataclass(frozen=True, eq=False)
class PcaModel:
    loadings: np.ndarray  # D x D, columns are components
    eigenvalues: np.ndarray
    descriptor_sds: Optional[np.ndarray] = None
    target: Optional[np.ndarray] = None

    @property
    def first_axis(self) -> np.ndarray:
        return self.loadings[:, 0]


def pca_target_centered(z, descriptor_sds=None, target=None):
    """PCA of target-centred scaled descriptors without re-centring.

    Parameters
    ----------
    z : (n, D) array
        Rows ``(d - d*) / sd``.

    Returns
    -------
    (PcaModel, scores) with ``scores = z @ W``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[0] < 2:
        raise InsufficientData("PCA needs at least 2 rows")
    gram = z.T @ z
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    W = evecs[:, order]
    # sign convention: largest-magnitude entry of each column is positive
    pivot = W[np.argmax(np.abs(W), axis=0), np.arange(W.shape[1])]
    W = W * np.where(pivot < 0, -1.0, 1.0)
    model = PcaModel(W, evals, descriptor_sds, target)
    return model, z @ W


def pseudo_descriptor(pca: PcaModel, z_row) -> float:
    z_row = np.atleast_1d(np.asarray(z_row, dtype=float))
    return float(z_row @ pca.loadings[:, 0])


@dataclass(frozen=True, eq=False)
class PlsModel:
    """PLS1 decomposition ``P_std ~= X @ V``.

    ``zero_weight`` is set when the fit stopped early because no covariance
    between the deflated predictors and response remained.
    """

    scores: np.ndarray  # n x d
    back_transform: np.ndarray  # d x P, x-loading rows
    weights: np.ndarray  # d x P, unit weight vectors
    zero_weight: bool = False

    @property
    def n_components(self) -> int:
        return self.back_transform.shape[0]


def pls1_fit(P_std, y, d: int, rtol: float = 1e-10) -> PlsModel:
    """Classical PLS1 (NIPALS with deflation) for a single response."""
    E = np.array(P_std, dtype=float, copy=True)
    F = np.array(y, dtype=float, copy=True).ravel()
    n, P = E.shape
    if not 1 <= d <= P:
        raise ValueError(f"component count must be in [1, {P}], got {d}")
    if n < 2:
        raise InsufficientData("PLS needs at least 2 rows")
    if not np.any(E):
        raise ValueError("predictor matrix is identically zero")
    floor = rtol * max(np.linalg.norm(E) * np.linalg.norm(F), np.finfo(float).tiny)
    scores, loadings, weights = [], [], []
    stopped = False
    for _ in range(d):
        c = E.T @ F
        norm = np.linalg.norm(c)
        if norm <= floor:
            stopped = True
            break
        w = c / norm
        t = E @ w
        tt = t @ t
        p = E.T @ t / tt
        E -= np.outer(t, p)
        F -= (F @ t / tt) * t
        scores.append(t)
        loadings.append(p)
        weights.append(w)
    if not scores:
        raise ZeroWeight("response has no covariance with the predictors")
    return PlsModel(
        np.column_stack(scores), np.array(loadings), np.array(weights), zero_weight=stopped
    )


def predictor_spectrum(P_std) -> np.ndarray:
    """Eigenvalues of the predictor correlation matrix, descending."""
    P_std = np.asarray(P_std, dtype=float)
    corr = P_std.T @ P_std / max(P_std.shape[0] - 1, 1)
    return np.sort(np.clip(np.linalg.eigvalsh(corr), 0.0, None))[::-1]


def select_component_count(spectrum, policy: Union[int, str], n_predictors=None) -> int:
    """Number of PLS components: a fixed count clamped to ``[1, P]``, or Kaiser's rule.

    Kaiser's rule keeps the values strictly above the spectrum mean, never
    fewer than one.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.size == 0 or np.any(spectrum < 0):
        raise ValueError("spectrum must be non-empty and nonnegative")
    P = spectrum.size if n_predictors is None else int(n_predictors)
    if policy == "kaiser":
        return max(1, int(np.sum(spectrum > spectrum.mean())))
    return int(min(max(int(policy), 1), P))


def standardized_point(prefix, pls: PlsModel) -> np.ndarray:
    prefix = np.atleast_1d(np.asarray(prefix, dtype=float))
    return prefix @ pls.back_transform[: prefix.shape[0]]


def back_transform(prefix, pls: PlsModel, stats: StandardizationStats) -> np.ndarray:
    """Map pseudo-predictor coordinates ``(x_1..x_j)`` to original parameters."""
    j = np.atleast_1d(prefix).shape[0]
    if not 1 <= j <= pls.n_components:
        raise ValueError(f"prefix length must be in [1, {pls.n_components}]")
    return standardized_point(prefix, pls) * stats.predictor_sds + stats.predictor_means


def feasible_interval(j: int, prefix, pls: PlsModel, stats: StandardizationStats,
                      space: ParameterSpace, atol: float = 1e-9):
    """Values of the level-``j`` coordinate keeping the back-transform inside the box.

    ``prefix`` holds the already fixed coordinates ``x_1..x_{j-1}``. The image
    is affine in ``x_j`` so the feasible set is an interval; returns
    ``(lo, hi)`` or ``None`` when empty. ``atol`` is relative to the box width
    and absorbs round-off in previously chosen coordinates.
    """
    if not 1 <= j <= pls.n_components:
        raise ValueError(f"level must be in [1, {pls.n_components}]")
    prefix = np.asarray(prefix, dtype=float).ravel()[: j - 1]
    V = pls.back_transform
    base = stats.predictor_means + (prefix @ V[: j - 1]) * stats.predictor_sds
    slope = V[j - 1] * stats.predictor_sds
    slack = atol * (space.upper - space.lower)
    lo_b, hi_b = space.lower - slack, space.upper + slack
    lo, hi = -np.inf, np.inf
    for a, b, lb, ub in zip(base, slope, lo_b, hi_b):
        if b == 0.0:
            if not lb <= a <= ub:
                return None
            continue
        e1, e2 = (lb - a) / b, (ub - a) / b
        if e1 > e2:
            e1, e2 = e2, e1
        lo, hi = max(lo, e1), min(hi, e2)
    if lo > hi:
        return None
    return float(lo), float(hi)
