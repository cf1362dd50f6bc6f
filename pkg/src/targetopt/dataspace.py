"""Domain types, measurement storage, standardization and initial designs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateColumn, InsufficientData, SchemaMismatch


def _vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Target descriptor vector and the half-widths of its acceptance box."""

    target: np.ndarray
    halfwidths: np.ndarray

    def __post_init__(self):
        t = _vector(self.target, "target")
        h = _vector(self.halfwidths, "halfwidths")
        if h.shape == (1,) and t.shape[0] > 1:
            h = np.full_like(t, h[0])
        if t.shape != h.shape:
            raise ValueError("target and halfwidths must have equal length")
        if np.any(h <= 0):
            raise ValueError("halfwidths must be strictly positive")
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "halfwidths", h)

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return self.target - self.halfwidths

    @property
    def upper(self) -> np.ndarray:
        return self.target + self.halfwidths

    def to_dict(self) -> dict:
        return {"target": self.target.tolist(), "halfwidths": self.halfwidths.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TargetSpec":
        return cls(data["target"], data["halfwidths"])


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    """Box bounds on the process parameters plus an optional resolution.

    ``resolution`` holds the smallest distinguishable unit per parameter;
    two settings closer than it in every coordinate count as the same.
    """

    lower: np.ndarray
    upper: np.ndarray
    resolution: Optional[np.ndarray] = None

    def __post_init__(self):
        lo = _vector(self.lower, "lower")
        hi = _vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have equal length")
        if np.any(lo >= hi):
            raise ValueError("lower must be strictly below upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.resolution is not None:
            res = _vector(self.resolution, "resolution")
            if res.shape == (1,) and lo.shape[0] > 1:
                res = np.full_like(lo, res[0])
            if res.shape != lo.shape:
                raise ValueError("resolution must match the parameter count")
            if np.any(res <= 0) or np.any(res > hi - lo):
                raise ValueError("resolution must lie in (0, upper - lower]")
            object.__setattr__(self, "resolution", res)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, p, atol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - atol) and np.all(p <= self.upper + atol))

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.lower, self.upper)

    def to_dict(self) -> dict:
        out = {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.resolution is not None:
            out["resolution"] = self.resolution.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSpace":
        return cls(data["lower"], data["upper"], data.get("resolution"))


@dataclass
class StandardizationStats:
    predictor_means: np.ndarray
    predictor_sds: np.ndarray
    descriptor_sds: np.ndarray
    degenerate_predictors: tuple = ()

    def scale(self) -> np.ndarray:
        """Predictor sds with degenerate (zero) columns replaced by 1."""
        sd = self.predictor_sds.copy()
        sd[sd == 0.0] = 1.0
        return sd

    def destandardize(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.predictor_sds + self.predictor_means


@dataclass
class Dataset:
    """Replicate-aware store of (predictor, descriptor) measurements.

    Each evaluation point is stored once; every replicate measurement refers
    back to its point id. Model fitting sees one row per measurement.
    """

    n_predictors: int
    n_descriptors: int
    _point_ids: list = field(default_factory=list)
    _points: list = field(default_factory=list)
    _meas_ids: list = field(default_factory=list)
    _meas_rep: list = field(default_factory=list)
    _meas_d: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self._meas_ids)

    @property
    def n_points(self) -> int:
        return len(self._point_ids)

    @property
    def point_ids(self) -> list:
        return list(self._point_ids)

    def has_point(self, point_id: int) -> bool:
        return point_id in self._point_ids

    def point(self, point_id: int) -> np.ndarray:
        return self._points[self._point_ids.index(point_id)].copy()

    def next_point_id(self) -> int:
        return max(self._point_ids, default=-1) + 1

    def add_point(self, p, point_id: Optional[int] = None) -> int:
        p = _vector(p, "predictor")
        if p.shape[0] != self.n_predictors:
            raise ValueError(f"expected {self.n_predictors} predictors, got {p.shape[0]}")
        if point_id is None:
            point_id = self.next_point_id()
        if point_id in self._point_ids:
            raise ValueError(f"point id {point_id} already present")
        self._point_ids.append(int(point_id))
        self._points.append(p)
        return int(point_id)

    def add_measurement(self, point_id: int, d, replicate: Optional[int] = None) -> int:
        if point_id not in self._point_ids:
            raise KeyError(f"unknown point id {point_id}")
        d = _vector(d, "descriptor")
        if d.shape[0] != self.n_descriptors:
            raise ValueError(f"expected {self.n_descriptors} descriptors, got {d.shape[0]}")
        if replicate is None:
            replicate = self.replicate_count(point_id)
        self._meas_ids.append(int(point_id))
        self._meas_rep.append(int(replicate))
        self._meas_d.append(d)
        return int(replicate)

    def has_measurement(self, point_id: int, replicate: int) -> bool:
        return any(i == point_id and r == replicate for i, r in zip(self._meas_ids, self._meas_rep))

    def replicate_count(self, point_id: int) -> int:
        return sum(1 for i in self._meas_ids if i == point_id)

    def point_array(self) -> np.ndarray:
        if not self._points:
            return np.empty((0, self.n_predictors))
        return np.array(self._points)

    def measurement_ids(self) -> np.ndarray:
        return np.array(self._meas_ids, dtype=int)

    def predictors(self) -> np.ndarray:
        """Predictor matrix with one row per measurement."""
        if not self._meas_ids:
            return np.empty((0, self.n_predictors))
        index = {pid: k for k, pid in enumerate(self._point_ids)}
        return np.array([self._points[index[i]] for i in self._meas_ids])

    def descriptors(self) -> np.ndarray:
        if not self._meas_d:
            return np.empty((0, self.n_descriptors))
        return np.array(self._meas_d)

    def mean_descriptor(self, point_id: int) -> np.ndarray:
        rows = [d for i, d in zip(self._meas_ids, self._meas_d) if i == point_id]
        if not rows:
            raise KeyError(f"point {point_id} has no measurements")
        return np.mean(rows, axis=0)

    def subset(self, point_ids: Iterable[int]) -> "Dataset":
        keep = set(point_ids)
        out = Dataset(self.n_predictors, self.n_descriptors)
        for pid, p in zip(self._point_ids, self._points):
            if pid in keep:
                out.add_point(p, pid)
        for pid, rep, d in zip(self._meas_ids, self._meas_rep, self._meas_d):
            if pid in keep:
                out.add_measurement(pid, d, rep)
        return out

    def copy(self) -> "Dataset":
        return self.subset(self._point_ids)

    def rows(self):
        """Yield ``(p, d, point_id, replicate)`` per measurement in insertion order."""
        index = {pid: k for k, pid in enumerate(self._point_ids)}
        for pid, rep, d in zip(self._meas_ids, self._meas_rep, self._meas_d):
            yield self._points[index[pid]], d, pid, rep

    # -- delimited text I/O --------------------------------------------------

    def header(self) -> list:
        return dataset_header(self.n_predictors, self.n_descriptors)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for p, d, pid, rep in self.rows():
            writer.writerow([repr(float(v)) for v in p] + [repr(float(v)) for v in d] + [pid, rep])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n_predictors=None, n_descriptors=None) -> "Dataset":
        rows = read_dataset_rows(text, n_predictors, n_descriptors)
        P, D = rows.n_predictors, rows.n_descriptors
        ds = cls(P, D)
        for p, d, pid, rep in rows.rows:
            if not ds.has_point(pid):
                ds.add_point(p, pid)
            elif not np.array_equal(ds.point(pid), p):
                raise SchemaMismatch(f"point {pid} appears with different predictor values")
            ds.add_measurement(pid, d, rep)
        return ds


def dataset_header(n_predictors: int, n_descriptors: int) -> list:
    return (
        [f"p{i + 1}" for i in range(n_predictors)]
        + [f"d{j + 1}" for j in range(n_descriptors)]
        + ["point_id", "replicate"]
    )


@dataclass
class DatasetRows:
    n_predictors: int
    n_descriptors: int
    rows: list


def _parse_header(header: Sequence[str]):
    names = [h.strip() for h in header]
    if names[-2:] != ["point_id", "replicate"]:
        raise SchemaMismatch("header must end with point_id,replicate")
    body = names[:-2]
    P = sum(1 for h in body if h.startswith("p"))
    D = len(body) - P
    if body != dataset_header(P, D)[:-2]:
        raise SchemaMismatch(f"unexpected header {','.join(names)}")
    return P, D


def read_dataset_rows(text: str, n_predictors=None, n_descriptors=None) -> DatasetRows:
    """Parse measurement rows (``p1..pP,d1..dD,point_id,replicate``)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("missing header") from None
    P, D = _parse_header(header)
    if n_predictors is not None and P != n_predictors:
        raise SchemaMismatch(f"expected {n_predictors} predictor columns, found {P}")
    if n_descriptors is not None and D != n_descriptors:
        raise SchemaMismatch(f"expected {n_descriptors} descriptor columns, found {D}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != P + D + 2:
            raise SchemaMismatch(f"line {lineno}: expected {P + D + 2} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row[: P + D]]
            pid, rep = int(row[P + D]), int(row[P + D + 1])
        except ValueError as exc:
            raise SchemaMismatch(f"line {lineno}: {exc}") from None
        rows.append((np.array(vals[:P]), np.array(vals[P:]), pid, rep))
    return DatasetRows(P, D, rows)


# -- operations ------------------------------------------------------------------


def _sample_sd(x: np.ndarray) -> np.ndarray:
    return np.std(x, axis=0, ddof=1)


def standardize_arrays(P: np.ndarray, Dm: np.ndarray, target) -> tuple:
    """Array form of :func:`standardize`.

    Returns ``(stats, P_std, Z)``. Predictors are mean-centred and scaled by
    their sample sd; descriptors are shifted so the target sits at the
    origin and scaled by their sample sd (taken about the column mean).
    """
    P = np.asarray(P, dtype=float)
    Dm = np.asarray(Dm, dtype=float)
    n = P.shape[0]
    if n < 2:
        raise InsufficientData(f"need at least 2 measurements, got {n}")
    dsd = _sample_sd(Dm)
    dsd[np.ptp(Dm, axis=0) == 0.0] = 0.0
    bad = np.flatnonzero(dsd == 0.0)
    if bad.size:
        raise DegenerateColumn(f"descriptor columns {bad.tolist()} are constant", bad.tolist())
    mu = P.mean(axis=0)
    psd = _sample_sd(P)
    # sample sd of a constant column can come out as a few ulps instead of 0
    psd[np.ptp(P, axis=0) == 0.0] = 0.0
    stats = StandardizationStats(mu, psd, dsd, tuple(np.flatnonzero(psd == 0.0).tolist()))
    P_std = (P - mu) / stats.scale()
    Z = (Dm - np.asarray(target, dtype=float)) / dsd
    return stats, P_std, Z


def standardize(dataset: Dataset, target: TargetSpec) -> tuple:
    return standardize_arrays(dataset.predictors(), dataset.descriptors(), target.target)


def initial_design(kind: str, k: int, space: ParameterSpace, seed: int) -> np.ndarray:
    """Draw ``k`` starting points inside ``space``.

    ``kind`` is ``"latin-hypercube"`` (one point per stratum of width
    ``(upper - lower) / k`` in every dimension) or ``"uniform-random"``.
    """
    if k < 2:
        raise ValueError("initial design needs k >= 2")
    rng = np.random.default_rng(seed)
    P = space.dim
    width = space.upper - space.lower
    if kind == "latin-hypercube":
        strata = np.column_stack([rng.permutation(k) for _ in range(P)])
        u = (strata + rng.random((k, P))) / k
    elif kind == "uniform-random":
        u = rng.random((k, P))
    else:
        raise ValueError(f"unknown design kind {kind!r}")
    return np.minimum(space.lower + u * width, space.upper)


def proximity_conflict(candidate, dataset_or_points, space: ParameterSpace) -> bool:
    """True if ``candidate`` is within the resolution of an observed point in every coordinate."""
    if space.resolution is None:
        return False
    if isinstance(dataset_or_points, Dataset):
        pts = dataset_or_points.point_array()
    else:
        pts = np.asarray(dataset_or_points, dtype=float).reshape(-1, space.dim)
    if pts.shape[0] == 0:
        return False
    gaps = np.abs(pts - np.asarray(candidate, dtype=float))
    return bool(np.any(np.all(gaps < space.resolution, axis=1)))


def in_target(mean_descriptor, target: TargetSpec) -> bool:
    dev = np.abs(np.asarray(mean_descriptor, dtype=float) - target.target)
    return bool(np.all(dev <= target.halfwidths))
