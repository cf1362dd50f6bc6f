"""File-based suggest/observe loop for running the optimizer against a real process.

The state file is JSON holding the target, bounds, approach, dataset and the
points still waiting for measurements. Measurements come in as delimited
text with the dataset header ``p1..pP,d1..dD,point_id,replicate``;
suggestions go out as ``p1..pP,point_id,replicate``, one row per replicate
still owed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataspace import Dataset, ParameterSpace, TargetSpec, initial_design, read_dataset_rows
from .errors import InsufficientData, SchemaMismatch, StateCorrupt
from .optimizer import ApproachConfig, iterate

STATE_SCHEMA = "targetopt-state"
STATE_VERSION = 1


@dataclass
class SessionState:
    target: TargetSpec
    space: ParameterSpace
    approach: ApproachConfig = field(default_factory=ApproachConfig)
    replicates: int = 1
    branch_cap: int = 16
    seed: int = 0
    rng_state: Optional[dict] = None
    iteration: int = 0
    dataset: Optional[Dataset] = None
    pending: list = field(default_factory=list)  # [{"id", "p", "provenance"}]
    last_batch: list = field(default_factory=list)

    def __post_init__(self):
        if self.dataset is None:
            self.dataset = Dataset(self.space.dim, self.target.dim)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        ds = self.dataset
        return {
            "schema": STATE_SCHEMA,
            "version": STATE_VERSION,
            "target": self.target.to_dict(),
            "space": self.space.to_dict(),
            "approach": self.approach.to_dict(),
            "replicates": self.replicates,
            "branch_cap": self.branch_cap,
            "seed": self.seed,
            "rng_state": self.rng_state,
            "iteration": self.iteration,
            "points": [{"id": pid, "p": ds.point(pid).tolist()} for pid in ds.point_ids],
            "measurements": [[pid, rep, [float(v) for v in d]] for _, d, pid, rep in ds.rows()],
            "pending": [{"id": c["id"], "p": list(c["p"]), "provenance": c["provenance"]}
                        for c in self.pending],
            "last_batch": list(self.last_batch),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SessionState":
        if not isinstance(data, dict) or data.get("schema") != STATE_SCHEMA:
            raise StateCorrupt("not a targetopt state file")
        if data.get("version") != STATE_VERSION:
            raise SchemaMismatch(f"state version {data.get('version')!r}, expected {STATE_VERSION}")
        try:
            target = TargetSpec.from_dict(data["target"])
            space = ParameterSpace.from_dict(data["space"])
            state = cls(
                target=target,
                space=space,
                approach=ApproachConfig.from_dict(data["approach"]),
                replicates=int(data["replicates"]),
                branch_cap=int(data["branch_cap"]),
                seed=int(data["seed"]),
                rng_state=data.get("rng_state"),
                iteration=int(data["iteration"]),
                pending=[{"id": int(c["id"]), "p": [float(v) for v in c["p"]],
                          "provenance": str(c["provenance"])} for c in data["pending"]],
                last_batch=[int(i) for i in data["last_batch"]],
            )
            for pt in data["points"]:
                state.dataset.add_point(pt["p"], int(pt["id"]))
            for pid, rep, d in data["measurements"]:
                state.dataset.add_measurement(int(pid), d, int(rep))
        except (KeyError, TypeError, ValueError) as exc:
            raise StateCorrupt(f"state file is inconsistent: {exc}") from None
        return state

    @classmethod
    def loads(cls, text: str) -> "SessionState":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StateCorrupt(f"state file is not valid JSON (line {exc.lineno}): {exc.msg}") from None
        return cls.from_dict(data)


def init_state(target: TargetSpec, space: ParameterSpace, approach: ApproachConfig = ApproachConfig(),
               replicates: int = 1, design_kind: str = "latin-hypercube", design_size: int = 4,
               seed: int = 0, branch_cap: int = 16) -> SessionState:
    """Fresh session whose pending points are the initial design."""
    if target.dim < 1 or space.dim < 1:
        raise ValueError("target and space must be non-empty")
    design = initial_design(design_kind, design_size, space, seed)
    rng = np.random.default_rng(seed)
    state = SessionState(target, space, approach, replicates, branch_cap, seed,
                         rng.bit_generator.state)
    state.pending = [{"id": i, "p": [float(v) for v in p], "provenance": "initial"}
                     for i, p in enumerate(design)]
    return state


def ingest(state: SessionState, measurements_text: str) -> int:
    """Add measurement rows to ``state``; rows already stored are skipped.

    Returns the number of new measurements. A row for an already stored
    ``(point_id, replicate)`` with different values, or whose predictors
    disagree with the recorded point, raises :class:`SchemaMismatch`.
    """
    if not measurements_text.strip():
        return 0
    rows = read_dataset_rows(measurements_text, state.space.dim, state.target.dim)
    ds = state.dataset
    stored = {(pid, rep): d for _, d, pid, rep in ds.rows()}
    pending = {c["id"]: np.asarray(c["p"], dtype=float) for c in state.pending}
    added = 0
    for p, d, pid, rep in rows.rows:
        if (pid, rep) in stored:
            if not np.array_equal(stored[(pid, rep)], d):
                raise SchemaMismatch(f"point {pid} replicate {rep} conflicts with a stored measurement")
            continue
        if ds.has_point(pid):
            if not np.allclose(ds.point(pid), p, rtol=1e-12, atol=1e-12):
                raise SchemaMismatch(f"point {pid}: predictors differ from the recorded point")
        else:
            if pid in pending and not np.allclose(pending[pid], p, rtol=1e-12, atol=1e-12):
                raise SchemaMismatch(f"point {pid}: predictors differ from the suggested point")
            ds.add_point(pending.get(pid, p), pid)
        ds.add_measurement(pid, d, rep)
        stored[(pid, rep)] = d
        added += 1
    return added


def _owed(state: SessionState) -> list:
    """``(point_id, p, replicate)`` for every replicate still missing on a pending point."""
    ds = state.dataset
    out = []
    for c in state.pending:
        for rep in range(state.replicates):
            if not (ds.has_point(c["id"]) and ds.has_measurement(c["id"], rep)):
                out.append((c["id"], c["p"], rep))
    return out


def advance(state: SessionState) -> list:
    """Run one iteration once every pending point is fully measured.

    Returns the owed ``(point_id, p, replicate)`` rows after the update.
    """
    owed = _owed(state)
    if owed:
        return owed
    if len(state.dataset) < 3:
        raise InsufficientData("need at least 3 measurements before the first iteration")
    batch = [c["id"] for c in state.pending]
    cands = iterate(state.dataset, state.target, state.space, state.approach,
                    state.branch_cap, batch or None)
    next_id = max(state.dataset.point_ids + batch, default=-1) + 1
    state.last_batch = batch
    state.iteration += 1
    state.pending = [{"id": next_id + k, "p": [float(v) for v in c.p], "provenance": c.provenance}
                     for k, c in enumerate(cands)]
    return _owed(state)


def suggestions_csv(state: SessionState, owed: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"p{i + 1}" for i in range(state.space.dim)] + ["point_id", "replicate"])
    for pid, p, rep in owed:
        w.writerow([repr(float(v)) for v in p] + [pid, rep])
    return buf.getvalue()


def suggest_observe_step(state_text: str, measurements_text: str = "") -> tuple:
    """One round trip: ingest measurements, iterate if due, emit suggestions.

    Returns ``(new_state_text, suggestions_text)``. The function is pure, and
    feeding its own output state back with the same measurements yields the
    same suggestions.
    """
    state = SessionState.loads(state_text)
    ingest(state, measurements_text)
    owed = advance(state)
    return state.dumps(), suggestions_csv(state, owed)
