"""Real roots of a fitted polynomial and the space-filling fallback."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInterval, IdenticallyZero

TRIM_RTOL = 1e-12
IMAG_RTOL = 1e-9
DEDUP_RTOL = 1e-9


@dataclass
class RootSet:
    roots: list = field(default_factory=list)
    method: str = "roots"  # "roots" or "fallback"

    def __len__(self):
        return len(self.roots)


def _trim(coefficients) -> np.ndarray:
    beta = np.asarray(coefficients, dtype=float).ravel()
    scale = np.max(np.abs(beta)) if beta.size else 0.0
    if scale == 0.0:
        return beta[:1] * 0.0
    keep = np.flatnonzero(np.abs(beta) >= TRIM_RTOL * scale)
    return beta[: keep[-1] + 1]


def companion_roots(coefficients) -> np.ndarray:
    """Complex roots of ``sum beta_k x**k`` via companion-matrix eigenvalues."""
    beta = _trim(coefficients)
    m = beta.size - 1
    if m < 1:
        return np.empty(0, dtype=complex)
    C = np.zeros((m, m))
    C[1:, :-1] = np.eye(m - 1)
    C[:, -1] = -beta[:-1] / beta[-1]
    return np.linalg.eigvals(C)


def _polish(beta: np.ndarray, r: float, steps: int = 8) -> float:
    poly = np.polynomial.polynomial
    dbeta = poly.polyder(beta)
    fr = abs(poly.polyval(r, beta))
    for _ in range(steps):
        if fr == 0.0:
            break
        slope = poly.polyval(r, dbeta)
        if slope == 0.0:
            break
        cand = r - poly.polyval(r, beta) / slope
        fc = abs(poly.polyval(cand, beta))
        if not fc < fr:
            break
        r, fr = cand, fc
    return r


def real_roots(poly, interval) -> RootSet:
    """All real roots of ``poly`` lying in ``[lo, hi]``, sorted.

    ``poly`` is a :class:`~targetopt.regression.PolynomialModel` or a
    coefficient sequence (constant first). Eigenvalues with imaginary part
    below ``1e-9 * (1 + |root|)`` count as real and are refined by Newton
    steps that are only accepted while ``|f|`` decreases.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if lo > hi:
        raise ValueError("interval must satisfy lo <= hi")
    beta = _trim(getattr(poly, "coefficients", poly))
    if beta.size == 1:
        if beta[0] == 0.0:
            raise IdenticallyZero("polynomial is identically zero")
        return RootSet([], "roots")
    width = hi - lo
    tol_edge = 1e-12 * (1.0 + width)
    found = []
    for z in companion_roots(beta):
        if abs(z.imag) > IMAG_RTOL * (1.0 + abs(z.real)):
            continue
        r = _polish(beta, float(z.real))
        if lo - tol_edge <= r <= hi + tol_edge:
            found.append(min(max(r, lo), hi))
    found.sort()
    dedup = []
    for r in found:
        if dedup and r - dedup[-1] <= DEDUP_RTOL * width:
            continue
        dedup.append(r)
    return RootSet(dedup, "roots")


def fallback_maximin(observed, interval) -> float:
    """Point of ``[lo, hi]`` farthest from its nearest observed value.

    The objective is piecewise linear, so the optimum sits at an endpoint or
    at the midpoint between two consecutive observed values. Ties go to the
    smallest coordinate; with no observations the midpoint is returned.
    """
    if interval is None:
        raise EmptyInterval("no feasible values")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo <= hi or not (np.isfinite(lo) and np.isfinite(hi)):
        raise EmptyInterval(f"invalid interval [{lo}, {hi}]")
    obs = np.unique(np.asarray(observed, dtype=float).ravel())
    if obs.size == 0:
        return 0.5 * (lo + hi)
    mids = 0.5 * (obs[:-1] + obs[1:])
    cands = np.concatenate([[lo, hi], mids[(mids >= lo) & (mids <= hi)]])
    cands = np.unique(cands)
    dist = np.min(np.abs(cands[:, None] - obs[None, :]), axis=1)
    best = dist.max()
    # unique() sorts, so the first hit is the smallest coordinate
    return float(cands[np.flatnonzero(dist >= best)[0]])
