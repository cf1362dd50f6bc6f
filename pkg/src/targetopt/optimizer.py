"""Sequential target optimizer.

One iteration: standardize, target-centred PCA of the descriptors, PLS1 of
the predictors against the first PCA score, then for each PLS level a
polynomial fit whose roots (or, failing that, a maximin fallback) fix the
next pseudo-predictor coordinate. Complete coordinate prefixes are mapped
back to parameter space and measured.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dataspace import (
    Dataset,
    ParameterSpace,
    StandardizationStats,
    TargetSpec,
    in_target,
    initial_design,
    proximity_conflict,
    standardize_arrays,
)
from .errors import (
    AllWeightsDegenerate,
    DegenerateColumn,
    DegenerateToConstant,
    InsufficientData,
    OracleFailure,
    ZeroWeight,
)
from .reduction import (
    PlsModel,
    back_transform,
    feasible_interval,
    pca_target_centered,
    pls1_fit,
    predictor_spectrum,
    select_component_count,
)
from .regression import eq1_weights, fit_polynomial
from .rootsearch import fallback_maximin, real_roots

log = logging.getLogger(__name__)

APPROACHES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class ApproachConfig:
    """Variant of the loop.

    1. one PLS component, unweighted level-1 fit
    2. one PLS component, level-1 fit weighted by the distance weights
    3. all components (``d = P`` unless ``component_count`` says otherwise)
    4. as 3, modelling only the ``neighbor_count`` unique points nearest the
       previously evaluated point
    5. as 3, choosing the descriptor PCA axis from the last ``pca_window``
       evaluation points only
    """

    id: int = 3
    component_count: Union[int, str, None] = None
    neighbor_count: int = 15
    pca_window: int = 5
    max_degree: int = 5

    def __post_init__(self):
        if self.id not in APPROACHES:
            raise ValueError(f"approach id must be one of {APPROACHES}, got {self.id}")
        if isinstance(self.component_count, str) and self.component_count != "kaiser":
            raise ValueError("component_count must be an integer, 'kaiser' or None")
        if self.neighbor_count < 2 or self.pca_window < 1:
            raise ValueError("neighbor_count >= 2 and pca_window >= 1 required")
        if not 1 <= self.max_degree <= 5:
            raise ValueError("max_degree must be in 1..5")

    def components(self, n_predictors: int, P_std=None) -> int:
        if self.id in (1, 2):
            return 1
        if self.component_count is None:
            return n_predictors
        spectrum = predictor_spectrum(P_std) if self.component_count == "kaiser" else np.ones(n_predictors)
        return select_component_count(spectrum, self.component_count, n_predictors)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "component_count": self.component_count,
            "neighbor_count": self.neighbor_count,
            "pca_window": self.pca_window,
            "max_degree": self.max_degree,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ApproachConfig":
        return cls(**data)


@dataclass
class RunConfig:
    max_iterations: int = 40
    replicates: int = 1
    seed: int = 0
    design_kind: str = "uniform-random"
    design_size: int = 4
    design_space: Optional[ParameterSpace] = None
    initial_points: Optional[np.ndarray] = None
    branch_cap: int = 16
    max_points: Optional[int] = None
    stop_on_hit: bool = False

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.replicates < 1 or self.branch_cap < 1:
            raise ValueError("replicates and branch_cap must be >= 1")


@dataclass
class Candidate:
    p: np.ndarray
    provenance: str  # "root", "fallback" or "initial"
    prefix: tuple = ()


@dataclass
class RunTrace:
    """Everything measured during one run, one entry per evaluation point."""

    points: list = field(default_factory=list)
    point_ids: list = field(default_factory=list)
    measurements: list = field(default_factory=list)  # (l, D) arrays
    observed: list = field(default_factory=list)
    actual: list = field(default_factory=list)
    provenance: list = field(default_factory=list)
    iteration: list = field(default_factory=list)
    hit: list = field(default_factory=list)
    elapsed: float = 0.0
    error: Optional[str] = None

    def __len__(self):
        return len(self.points)

    def append(self, p, point_id, meas, observed, actual, provenance, iteration, hit):
        self.points.append(np.asarray(p, dtype=float))
        self.point_ids.append(int(point_id))
        self.measurements.append(np.asarray(meas, dtype=float))
        self.observed.append(float(observed))
        self.actual.append(float(actual))
        self.provenance.append(provenance)
        self.iteration.append(int(iteration))
        self.hit.append(bool(hit))

    def running_min(self, kind: str = "observed") -> np.ndarray:
        """Best distance within the first ``i`` points, for each ``i``.

        ``observed`` and ``actual`` are running minima of the respective
        distances. ``incumbent`` is the actual distance of the point with the
        smallest observed distance so far (earliest on ties); with noise it
        can go up when a lucky measurement takes over.
        """
        if kind == "incumbent":
            obs = np.asarray(self.observed, dtype=float)
            act = np.asarray(self.actual, dtype=float)
            if not obs.size:
                return obs
            best = np.zeros(obs.size, dtype=int)
            for i in range(1, obs.size):
                best[i] = i if obs[i] < obs[best[i - 1]] else best[i - 1]
            return act[best]
        if kind not in ("observed", "actual"):
            raise ValueError(f"unknown distance kind {kind!r}")
        values = np.asarray(self.observed if kind == "observed" else self.actual, dtype=float)
        return np.minimum.accumulate(values) if values.size else values

    def truncated(self, n: int) -> "RunTrace":
        out = RunTrace(elapsed=self.elapsed, error=self.error)
        for name in ("points", "point_ids", "measurements", "observed", "actual",
                     "provenance", "iteration", "hit"):
            setattr(out, name, list(getattr(self, name)[:n]))
        return out

    def equals(self, other: "RunTrace") -> bool:
        if len(self) != len(other):
            return False
        same = lambda a, b: all(np.array_equal(x, y, equal_nan=True) for x, y in zip(a, b))
        return (
            same(self.points, other.points)
            and same(self.measurements, other.measurements)
            and self.point_ids == other.point_ids
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.actual, other.actual, equal_nan=True)
            and self.provenance == other.provenance
            and self.iteration == other.iteration
        )


def observed_distance(dataset: Dataset, point_id: int, target: TargetSpec) -> float:
    return float(np.linalg.norm(dataset.mean_descriptor(point_id) - target.target))


# -- one iteration -----------------------------------------------------------------


def _reference_point(dataset: Dataset, target: TargetSpec, last_batch) -> np.ndarray:
    ids = [i for i in (last_batch or []) if dataset.has_point(i) and dataset.replicate_count(i)]
    if not ids:
        measured = [i for i in dataset.point_ids if dataset.replicate_count(i)]
        ids = measured[-1:]
    best = min(ids, key=lambda i: observed_distance(dataset, i, target))
    return dataset.point(best)


def _neighbor_rows(P: np.ndarray, ref: np.ndarray, k: int) -> np.ndarray:
    """Row mask selecting the ``k`` unique standardized points nearest ``ref``."""
    mu = P.mean(axis=0)
    sd = np.std(P, axis=0, ddof=1) if P.shape[0] > 1 else np.ones(P.shape[1])
    sd[sd == 0.0] = 1.0
    S = (P - mu) / sd
    uniq, inverse = np.unique(S, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    if uniq.shape[0] <= k:
        return np.ones(P.shape[0], dtype=bool)
    dist = np.linalg.norm(uniq - (ref - mu) / sd, axis=1)
    chosen = np.argsort(dist, kind="stable")[:k]
    return np.isin(inverse, chosen)


def _bounded(interval, coords: np.ndarray):
    """Replace infinite ends (zero back-transform slope) by a span around the data."""
    lo, hi = interval
    if np.isfinite(lo) and np.isfinite(hi):
        return interval
    span = max(float(np.ptp(coords)), 1.0)
    if not np.isfinite(lo):
        lo = float(np.min(coords)) - span
    if not np.isfinite(hi):
        hi = float(np.max(coords)) + span
    return lo, hi


@dataclass
class _Fitted:
    stats: StandardizationStats
    pls: PlsModel
    y_scores: np.ndarray
    degenerate: bool = False


def _identity_model(P_std: np.ndarray, stats: StandardizationStats) -> _Fitted:
    """Axis-aligned stand-in used when no descriptor/predictor relation can be fitted."""
    P = P_std.shape[1]
    pls = PlsModel(P_std.copy(), np.eye(P), np.eye(P), zero_weight=True)
    return _Fitted(stats, pls, np.zeros((P_std.shape[0], 1)), degenerate=True)


def _fit_reduction(P: np.ndarray, Dm: np.ndarray, target: TargetSpec,
                   approach: ApproachConfig, pca_rows: np.ndarray) -> _Fitted:
    try:
        stats, P_std, Z = standardize_arrays(P, Dm, target.target)
    except DegenerateColumn:
        mu = P.mean(axis=0)
        sd = np.std(P, axis=0, ddof=1)
        sd[np.ptp(P, axis=0) == 0.0] = 0.0
        stats = StandardizationStats(mu, sd, np.zeros(Dm.shape[1]))
        return _identity_model((P - mu) / stats.scale(), stats)
    zsub = Z[pca_rows] if pca_rows is not None and np.count_nonzero(pca_rows) >= 2 else Z
    pca, _ = pca_target_centered(zsub, stats.descriptor_sds, target.target)
    y_scores = Z @ pca.loadings
    d = approach.components(P.shape[1], P_std)
    if not np.any(P_std):
        return _identity_model(P_std, stats)
    try:
        pls = pls1_fit(P_std, y_scores[:, 0], d)
    except ZeroWeight:
        return _identity_model(P_std, stats)
    return _Fitted(stats, pls, y_scores)


def _level_roots(fitted: _Fitted, j: int, prefix: tuple, interval, approach: ApproachConfig):
    """Roots of the level-``j`` polynomial inside ``interval`` (empty list if none)."""
    if fitted.degenerate:
        return []
    x = fitted.pls.scores[:, j - 1]
    y = fitted.y_scores[:, 0]
    weights = None
    if j >= 2 or approach.id == 2:
        try:
            weights = eq1_weights(j, prefix, fitted.pls.scores, fitted.y_scores)
        except AllWeightsDegenerate:
            weights = None
    try:
        poly = fit_polynomial(x, y, weights, approach.max_degree)
        return list(real_roots(poly, interval).roots)
    except (InsufficientData, DegenerateToConstant):
        return []


def iterate(dataset: Dataset, target: TargetSpec, space: ParameterSpace,
            approach: ApproachConfig, branch_cap: int = 16,
            last_batch: Optional[Sequence[int]] = None) -> list:
    """Propose the next evaluation points.

    Returns at most ``branch_cap`` :class:`Candidate` objects, never an
    empty list. ``last_batch`` lists the point ids evaluated in the previous
    iteration; approach 4 centres its neighbourhood on the best of them.
    """
    if len(dataset) < 3:
        raise InsufficientData(f"need at least 3 measurements, got {len(dataset)}")
    P = dataset.predictors()
    Dm = dataset.descriptors()
    meas_ids = dataset.measurement_ids()

    if approach.id == 4:
        ref = _reference_point(dataset, target, last_batch)
        keep = _neighbor_rows(P, ref, approach.neighbor_count)
        P, Dm, meas_ids = P[keep], Dm[keep], meas_ids[keep]

    pca_rows = None
    if approach.id == 5:
        present = [i for i in dataset.point_ids if i in set(meas_ids.tolist())]
        pca_rows = np.isin(meas_ids, present[-approach.pca_window:])

    fitted = _fit_reduction(P, Dm, target, approach, pca_rows)
    stats, pls = fitted.stats, fitted.pls

    branches = [((), "root")]
    for j in range(1, pls.n_components + 1):
        coords = pls.scores[:, j - 1]
        children = []
        for prefix, prov in branches:
            interval = feasible_interval(j, prefix, pls, stats, space)
            if interval is None:
                # previous coordinates sit on the box edge; stay at the prefix point
                interval = (0.0, 0.0)
            interval = _bounded(interval, coords)
            roots = _level_roots(fitted, j, prefix, interval, approach)
            if roots:
                children.extend((prefix + (r,), prov) for r in roots)
            else:
                children.append((prefix + (fallback_maximin(coords, interval),), "fallback"))
        children.sort(key=lambda c: abs(c[0][-1]))
        branches = children[:branch_cap]

    candidates = []
    seen = dataset.point_array()
    for prefix, prov in branches:
        p = space.clip(back_transform(prefix, pls, stats))
        if any(np.array_equal(p, c.p) for c in candidates):
            continue
        if proximity_conflict(p, seen, space):
            continue
        candidates.append(Candidate(p, prov, tuple(float(v) for v in prefix)))
        seen = np.vstack([seen, p])
    if not candidates:
        interval = _bounded(feasible_interval(1, (), pls, stats, space) or (0.0, 0.0),
                            pls.scores[:, 0])
        x1 = fallback_maximin(pls.scores[:, 0], interval)
        p = space.clip(back_transform((x1,), pls, stats))
        candidates.append(Candidate(p, "fallback", (float(x1),)))
    return candidates


# -- full run ----------------------------------------------------------------------

Oracle = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def _measure(oracle: Oracle, p, l: int, rng, trace: RunTrace) -> np.ndarray:
    try:
        return np.array([np.asarray(oracle(p, rng), dtype=float).ravel() for _ in range(l)])
    except Exception as exc:  # the measurement source is foreign code
        raise OracleFailure(f"oracle failed at p={np.asarray(p).tolist()}: {exc}", trace) from exc


def run(oracle: Oracle, target: TargetSpec, space: ParameterSpace,
        approach: ApproachConfig, cfg: RunConfig,
        truth: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> RunTrace:
    """Evaluate the initial design, then up to ``cfg.max_iterations`` iterations.

    ``oracle(p, rng)`` returns one (possibly noisy) descriptor measurement;
    ``truth(p)`` the noise-free value used for the actual distance. The
    acceptance check is recorded per point and only ends the run when
    ``cfg.stop_on_hit`` is set.
    """
    design_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(noise_seq)
    if cfg.initial_points is not None:
        init = np.atleast_2d(np.asarray(cfg.initial_points, dtype=float))
    else:
        init = initial_design(cfg.design_kind, cfg.design_size, cfg.design_space or space, design_seq)
    budget = cfg.max_points if cfg.max_points is not None else np.inf

    dataset = Dataset(space.dim, target.dim)
    trace = RunTrace()

    def evaluate(p, provenance, iteration):
        meas = _measure(oracle, p, cfg.replicates, rng, trace)
        pid = dataset.add_point(p)
        for rep, d in enumerate(meas):
            dataset.add_measurement(pid, d, rep)
        mean = meas.mean(axis=0)
        act = np.linalg.norm(np.asarray(truth(p)) - target.target) if truth is not None else np.nan
        hit = in_target(mean, target)
        trace.append(p, pid, meas, np.linalg.norm(mean - target.target), act, provenance, iteration, hit)
        return pid, hit

    for p in init:
        if len(trace) >= budget:
            return trace
        evaluate(p, "initial", 0)
    last_batch = list(dataset.point_ids)
    for it in range(1, cfg.max_iterations + 1):
        if len(trace) >= budget:
            break
        batch, stop = [], False
        for cand in iterate(dataset, target, space, approach, cfg.branch_cap, last_batch):
            if len(trace) >= budget:
                break
            pid, hit = evaluate(cand.p, cand.provenance, it)
            batch.append(pid)
            stop = stop or (cfg.stop_on_hit and hit)
        last_batch = batch
        if stop:
            log.debug("target reached at iteration %d", it)
            break
    return trace
