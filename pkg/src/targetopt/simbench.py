"""Simulation study harness: test models, multi-path runs and summary curves."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .baselines import Nsga2Config, nsga2_run, random_search_run
from .dataspace import ParameterSpace, TargetSpec
from .errors import LengthMismatch, TargetOptError, UnknownModelId
from .optimizer import ApproachConfig, RunConfig, RunTrace, run

log = logging.getLogger(__name__)

SEARCH_BOUNDS = (-5.0, 5.0)
INITIAL_BOUNDS = (-4.0, 4.0)
N_INITIAL = 4
DEFAULT_ANCHOR = (1.0, 1.0)
DEFAULT_HALFWIDTH = 0.1


def _model1(p):
    return 0.8 * p[0] - 1.2 * p[1]


def _model2(p):
    return 0.5 * p[0] ** 2 + 0.5 * p[1] ** 2


def _model3(p):
    return 0.5 * p[0] ** 2 - 0.5 * p[1] ** 2


def _model4(p):
    return 0.8 * p[0] - 1.2 * np.sqrt(abs(p[1]))


_COMPONENTS = {1: (_model1,), 2: (_model2,), 3: (_model3,), 4: (_model4,),
               12: (_model1, _model2), 123: (_model1, _model2, _model3)}
MODEL_IDS = tuple(_COMPONENTS)


@dataclass(frozen=True)
class TestModel:
    """Benchmark mapping from two process parameters to 1-3 descriptors.

    Multi-response models stack the single-response ones: model 12 is
    (1, 2) and model 123 is (1, 2, 3). Noise is i.i.d. N(0, sigma^2) per
    descriptor and replicate.
    """

    __test__ = False  # not a pytest class

    id: int
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.id not in _COMPONENTS:
            raise UnknownModelId(f"unknown model id {self.id}; known: {MODEL_IDS}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    @property
    def n_descriptors(self) -> int:
        return len(_COMPONENTS[self.id])

    n_predictors = 2

    def mean(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (2,):
            raise ValueError("test models take exactly two parameters")
        return np.array([f(p) for f in _COMPONENTS[self.id]], dtype=float)

    def measure(self, p, rng: np.random.Generator) -> np.ndarray:
        d = self.mean(p)
        if self.noise_sd > 0:
            d = d + self.noise_sd * rng.standard_normal(d.shape[0])
        return d

    __call__ = measure


def evaluate_model(model_id: int, p, rng: Optional[np.random.Generator] = None,
                   sigma: float = 0.0) -> np.ndarray:
    model = TestModel(model_id, sigma)
    if sigma > 0 and rng is None:
        raise ValueError("a generator is required for noisy evaluation")
    return model.measure(p, rng) if sigma > 0 else model.mean(p)


def make_target(model_id: int, anchor=DEFAULT_ANCHOR, halfwidth: float = DEFAULT_HALFWIDTH) -> TargetSpec:
    """Target equal to the noise-free response at ``anchor``, so an exact solution exists."""
    anchor = np.asarray(anchor, dtype=float)
    lo, hi = SEARCH_BOUNDS
    if np.any(anchor < lo) or np.any(anchor > hi):
        raise ValueError("anchor must lie inside the search bounds")
    t = TestModel(model_id).mean(anchor)
    return TargetSpec(t, np.full_like(t, halfwidth))


def search_space() -> ParameterSpace:
    lo, hi = SEARCH_BOUNDS
    return ParameterSpace([lo, lo], [hi, hi])


# -- simulation -----------------------------------------------------------------

METHODS = ("approach1", "approach2", "approach3", "approach4", "approach5", "nsga2", "random")


@dataclass(frozen=True)
class SimSpec:
    """One cell of the study: a method on a model at a noise level and replicate count.

    Every path is given ``N_INITIAL + r`` evaluation points.
    """

    model: int
    method: str
    sigma: float = 0.0
    replicates: int = 1
    r: int = 40
    n_paths: int = 100
    seed: int = 0
    anchor: tuple = DEFAULT_ANCHOR
    halfwidth: float = DEFAULT_HALFWIDTH
    nsga2: Nsga2Config = field(default_factory=Nsga2Config)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; known: {METHODS}")
        if self.model not in _COMPONENTS:
            raise UnknownModelId(f"unknown model id {self.model}")
        if self.n_paths < 1 or self.r < 0 or self.replicates < 1:
            raise ValueError("n_paths >= 1, r >= 0 and replicates >= 1 required")

    @property
    def budget(self) -> int:
        return N_INITIAL + self.r


def path_seeds(master_seed: int, path: int):
    """Independent (initial design, method) seed streams for one path.

    Derived with numpy's SeedSequence from ``(master_seed, path)`` so a path
    does not depend on which worker runs it or on the other paths.
    """
    init, method = np.random.SeedSequence([int(master_seed), int(path)]).spawn(2)
    return init, method


def initial_points(master_seed: int, path: int, k: int = N_INITIAL) -> np.ndarray:
    """Shared starting points of a path, uniform in the initial box.

    Drawing more points extends the sequence: the first ``N_INITIAL`` rows
    never change, which keeps the common random numbers across methods.
    """
    lo, hi = INITIAL_BOUNDS
    rng = np.random.default_rng(path_seeds(master_seed, path)[0])
    return rng.uniform(lo, hi, size=(k, 2))


def run_path(spec: SimSpec, path: int) -> RunTrace:
    model = TestModel(spec.model, spec.sigma)
    target = make_target(spec.model, spec.anchor, spec.halfwidth)
    space = search_space()
    method_seed = int(path_seeds(spec.seed, path)[1].generate_state(1, np.uint64)[0])
    t0 = time.perf_counter()
    if spec.method.startswith("approach"):
        cfg = RunConfig(
            max_iterations=spec.r,
            replicates=spec.replicates,
            seed=method_seed,
            initial_points=initial_points(spec.seed, path),
            max_points=spec.budget,
        )
        approach = ApproachConfig(int(spec.method[-1]))
        trace = run(model.measure, target, space, approach, cfg, truth=model.mean)
    elif spec.method == "nsga2":
        N = spec.nsga2.population_size
        if spec.budget < N:
            N = max(4, spec.budget - spec.budget % 2)
        cfg = replace(spec.nsga2, population_size=N, seed=method_seed)
        trace = nsga2_run(model.measure, target, space, spec.budget, cfg, truth=model.mean,
                          replicates=spec.replicates, initial=initial_points(spec.seed, path, N))
    else:
        trace = random_search_run(model.measure, target, space, spec.budget, seed=method_seed,
                                  truth=model.mean, replicates=spec.replicates,
                                  initial=initial_points(spec.seed, path))
    trace.elapsed = time.perf_counter() - t0
    return trace


def _run_path_safe(args):
    spec, path = args
    try:
        return run_path(spec, path)
    except TargetOptError as exc:
        partial = getattr(exc, "trace", None) or RunTrace()
        partial.error = f"{type(exc).__name__}: {exc}"
        return partial


def simulate(spec: SimSpec, workers: int = 1) -> list:
    """Run ``spec.n_paths`` independent paths; results are ordered by path index.

    A failing path yields a (possibly partial) trace with ``error`` set rather
    than aborting the batch. Output does not depend on ``workers``.
    """
    jobs = [(spec, i) for i in range(spec.n_paths)]
    if workers <= 1:
        traces = [_run_path_safe(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_path_safe, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    for i, tr in enumerate(traces):
        if getattr(tr, "error", None):
            log.warning("path %d of %s/%s failed: %s", i, spec.model, spec.method, tr.error)
    return traces


def timing_capture(spec: SimSpec, workers: int = 1):
    """Run :func:`simulate` and return ``(traces, wall-clock seconds)``."""
    t0 = time.perf_counter()
    traces = simulate(spec, workers)
    return traces, time.perf_counter() - t0


# -- summaries ---------------------------------------------------------------------


DISTANCE_KINDS = ("observed", "actual", "incumbent")


@dataclass
class PerformanceCurve:
    q: float
    kind: str
    values: np.ndarray  # values[i - 1] summarizes the first i evaluation points

    @property
    def index(self) -> np.ndarray:
        return np.arange(1, self.values.shape[0] + 1)

    def at(self, i: int) -> float:
        return float(self.values[i - 1])


def _running_mins(traces: Sequence[RunTrace], kind: str) -> np.ndarray:
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise LengthMismatch(f"traces differ in length: {sorted(lengths)}")
    return np.array([t.running_min(kind) for t in traces])


def usable(traces: Sequence[RunTrace]) -> list:
    return [t for t in traces if not getattr(t, "error", None)]


def performance_quantiles(traces: Sequence[RunTrace], q: float = 0.95,
                          kind: str = "actual") -> PerformanceCurve:
    """Pointwise ``q``-quantile across paths of each path's running-minimum distance.

    Uses linear interpolation between order statistics (``h = (n-1) q + 1``).
    """
    if kind not in DISTANCE_KINDS:
        raise ValueError(f"kind must be one of {DISTANCE_KINDS}")
    mins = _running_mins(traces, kind)
    return PerformanceCurve(q, kind, np.quantile(mins, q, axis=0, method="linear"))


def bias_summary(traces: Sequence[RunTrace]) -> np.ndarray:
    """Mean over paths of the gap between true and observed quality of the incumbent.

    At index ``i`` the incumbent is the point with the smallest observed
    distance among the first ``i``; the gap is its actual distance minus that
    observed distance. Positive values mean the observed distances are
    optimistic. Without noise the gap is zero.
    """
    return np.mean(_running_mins(traces, "incumbent") - _running_mins(traces, "observed"), axis=0)


# -- result files --------------------------------------------------------------------

RESULT_HEADER = ["method", "model", "sigma", "replicates", "path", "eval_index",
                 "observed_min", "actual_min", "incumbent_actual"]


def result_rows(spec: SimSpec, traces: Sequence[RunTrace]):
    for path, tr in enumerate(traces):
        obs, act, inc = (tr.running_min(k) for k in DISTANCE_KINDS)
        for i in range(len(tr)):
            yield [spec.method, spec.model, repr(float(spec.sigma)), spec.replicates, path,
                   i + 1, repr(float(obs[i])), repr(float(act[i])), repr(float(inc[i]))]


def format_rows(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def timing_table(timings: dict, methods: Sequence[str]) -> str:
    """Seconds per method laid out with one column per (model, sigma, replicates) cell.

    ``timings`` maps ``(method, model, sigma, replicates)`` to seconds;
    missing cells print as ``-``.
    """
    cells = sorted({k[1:] for k in timings}, key=lambda c: (c[0], -c[1], c[2]))
    rows = [
        ["model"] + [str(c[0]) for c in cells],
        ["st. deviation"] + [repr(float(c[1])) for c in cells],
        ["repetitions"] + [str(c[2]) for c in cells],
    ]
    for m in methods:
        row = [m]
        for c in cells:
            v = timings.get((m,) + c)
            row.append("-" if v is None else f"{v:.3f}")
        rows.append(row)
    return format_rows(rows[1:], rows[0])
