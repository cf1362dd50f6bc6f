"""Comparator optimizers sharing the evaluation-point budget of the main loop.

NSGA-II minimizes the per-component absolute deviations from the target, so
its Pareto machinery is pulled towards the target point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dataspace import ParameterSpace, TargetSpec, in_target
from .optimizer import Oracle, RunTrace, _measure


@dataclass(frozen=True)
class Nsga2Config:
    population_size: int = 20
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: Optional[float] = None  # None means 1 / P
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 4")
        for name in ("crossover_prob", "mutation_prob"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def dominates(a, b) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(F) -> list:
    """Fast non-dominated sorting; returns fronts as lists of row indices."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] < 1:
        raise ValueError("objectives must be an (n, M) array with M >= 1")
    n = F.shape[0]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n, M = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(M):
        order = np.argsort(F[:, m], kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = F[order[-1], m] - F[order[0], m]
        if span == 0.0:
            continue
        dist[order[1:-1]] += (F[order[2:], m] - F[order[:-2], m]) / span
    return dist


def sbx_crossover(p1, p2, lower, upper, eta, prob, rng):
    """Simulated binary crossover, bounded variant."""
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > prob:
        return c1, c2
    for i in range(p1.shape[0]):
        if rng.random() > 0.5 or abs(p1[i] - p2[i]) <= 1e-14:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        yl, yu = lower[i], upper[i]
        u = rng.random()

        def spread(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                return (u * alpha) ** (1.0 / (eta + 1.0))
            return (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))

        bq = spread(1.0 + 2.0 * (y1 - yl) / (y2 - y1))
        a = 0.5 * ((y1 + y2) - bq * (y2 - y1))
        bq = spread(1.0 + 2.0 * (yu - y2) / (y2 - y1))
        b = 0.5 * ((y1 + y2) + bq * (y2 - y1))
        a, b = min(max(a, yl), yu), min(max(b, yl), yu)
        if rng.random() <= 0.5:
            a, b = b, a
        c1[i], c2[i] = a, b
    return c1, c2


def polynomial_mutation(x, lower, upper, eta, prob, rng):
    y = x.copy()
    for i in range(y.shape[0]):
        if rng.random() > prob:
            continue
        yl, yu = lower[i], upper[i]
        d1, d2 = (y[i] - yl) / (yu - yl), (yu - y[i]) / (yu - yl)
        u = rng.random()
        power = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**power
        y[i] = min(max(y[i] + dq * (yu - yl), yl), yu)
    return y


def _crowded_ranking(F: np.ndarray):
    rank = np.empty(F.shape[0], dtype=int)
    crowd = np.empty(F.shape[0])
    fronts = nondominated_sort(F)
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd, fronts


class _Evaluator:
    def __init__(self, oracle, target, replicates, truth, rng, budget):
        self.oracle, self.target, self.l = oracle, target, replicates
        self.truth, self.rng, self.budget = truth, rng, budget
        self.trace = RunTrace()

    @property
    def exhausted(self) -> bool:
        return len(self.trace) >= self.budget

    def __call__(self, p, provenance, generation) -> np.ndarray:
        meas = _measure(self.oracle, p, self.l, self.rng, self.trace)
        mean = meas.mean(axis=0)
        dev = mean - self.target.target
        act = np.nan
        if self.truth is not None:
            act = np.linalg.norm(np.asarray(self.truth(p)) - self.target.target)
        self.trace.append(p, len(self.trace), meas, np.linalg.norm(dev), act, provenance,
                          generation, in_target(mean, self.target))
        return np.abs(dev)


def nsga2_run(oracle: Oracle, target: TargetSpec, space: ParameterSpace, budget: int,
              cfg: Nsga2Config = Nsga2Config(), truth: Optional[Callable] = None,
              replicates: int = 1, initial=None) -> RunTrace:
    """NSGA-II on the objectives ``|mean measurement - target|`` (componentwise).

    Every evaluation is appended to the returned trace until ``budget``
    evaluation points are used. ``initial`` optionally supplies the first
    rows of the starting population; the rest is drawn uniformly in bounds.
    """
    N = cfg.population_size
    if budget < N:
        raise ValueError(f"budget ({budget}) must be at least the population size ({N})")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = space.lower, space.upper
    P = space.dim
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / P

    pop = rng.uniform(lo, hi, size=(N, P))
    if initial is not None:
        init = np.atleast_2d(np.asarray(initial, dtype=float))[:N]
        pop[: init.shape[0]] = init
    ev = _Evaluator(oracle, target, replicates, truth, rng, budget)
    F = np.array([ev(p, "initial", 0) for p in pop])
    gen = 0
    while not ev.exhausted:
        gen += 1
        rank, crowd, _ = _crowded_ranking(F)

        def tournament():
            i, j = rng.integers(N, size=2)
            if rank[i] != rank[j]:
                return i if rank[i] < rank[j] else j
            if crowd[i] != crowd[j]:
                return i if crowd[i] > crowd[j] else j
            return i if rng.random() < 0.5 else j

        kids = []
        while len(kids) < N:
            a, b = pop[tournament()], pop[tournament()]
            c1, c2 = sbx_crossover(a, b, lo, hi, cfg.crossover_eta, cfg.crossover_prob, rng)
            kids.append(polynomial_mutation(c1, lo, hi, cfg.mutation_eta, pm, rng))
            kids.append(polynomial_mutation(c2, lo, hi, cfg.mutation_eta, pm, rng))
        kid_F = []
        for k in kids:
            if ev.exhausted:
                break
            kid_F.append(ev(k, "nsga2", gen))
        if len(kid_F) < N:
            break
        union = np.vstack([pop, np.array(kids)])
        union_F = np.vstack([F, np.array(kid_F)])
        _, crowd_u, fronts = _crowded_ranking(union_F)
        chosen = []
        for front in fronts:
            if len(chosen) + len(front) <= N:
                chosen.extend(front)
                continue
            order = sorted(front, key=lambda i: -crowd_u[i])
            chosen.extend(order[: N - len(chosen)])
            break
        pop, F = union[chosen], union_F[chosen]
    return ev.trace


def random_search_run(oracle: Oracle, target: TargetSpec, space: ParameterSpace, budget: int,
                      seed: int = 0, truth: Optional[Callable] = None, replicates: int = 1,
                      initial=None) -> RunTrace:
    """Uniform i.i.d. points in bounds, preceded by ``initial`` if given."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(space.lower, space.upper, size=(budget, space.dim))
    if initial is not None:
        init = np.atleast_2d(np.asarray(initial, dtype=float))[:budget]
        pts[: init.shape[0]] = init
    ev = _Evaluator(oracle, target, replicates, truth, rng, budget)
    for i, p in enumerate(pts):
        ev(p, "initial" if initial is not None and i < len(initial) else "random", i)
    return ev.trace
