"""Command-line interface: ``targetopt {bench,plot,init-design,suggest,observe}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import session
from .config import StudyConfig
from .dataspace import ParameterSpace, TargetSpec
from .errors import ConfigError, SchemaMismatch, TargetOptError
from .optimizer import ApproachConfig
from .plotting import line_chart
from .simbench import (
    DISTANCE_KINDS,
    RESULT_HEADER,
    SimSpec,
    bias_summary,
    format_rows,
    performance_quantiles,
    result_rows,
    timing_capture,
    timing_table,
    usable,
)

log = logging.getLogger("targetopt")

OUT_ENV = "TARGETOPT_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def default_out() -> str:
    return os.environ.get(OUT_ENV, "results")


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _floats(text: str, name: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", name) from None


# -- bench ---------------------------------------------------------------------


def load_config(args) -> StudyConfig:
    if args.config is None:
        raise ConfigError("a config file is required", "--config")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(str(exc), "--config") from None
    cfg = StudyConfig.loads(text)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paths is not None:
        overrides["n_paths"] = args.paths
    if args.out is not None:
        overrides["out"] = args.out
    elif os.environ.get(OUT_ENV) and "out" not in _raw_keys(text):
        overrides["out"] = os.environ[OUT_ENV]
    if overrides:
        cfg = StudyConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _raw_keys(text: str) -> set:
    return set(json.loads(text))


def cmd_bench(args) -> int:
    cfg = load_config(args)
    out = Path(cfg.out)
    raw, quant, bias, failures = [], [], [], []
    timings = {}
    for model in cfg.models:
        for sigma in cfg.sigmas:
            for l in cfg.replicates:
                for method in cfg.methods:
                    spec = SimSpec(model, method, float(sigma), l, cfg.r, cfg.n_paths, cfg.seed,
                                   tuple(cfg.anchor), float(cfg.halfwidth), cfg.nsga2_config())
                    log.info("running %s model=%s sigma=%s l=%s", method, model, sigma, l)
                    traces, secs = timing_capture(spec, args.threads)
                    timings[(method, model, float(sigma), l)] = secs
                    raw.extend(result_rows(spec, traces))
                    key = [method, model, repr(float(sigma)), l]
                    failures.extend(key + [i, t.error] for i, t in enumerate(traces) if t.error)
                    good = usable(traces)
                    if not good:
                        continue
                    qs = [performance_quantiles(good, 0.95, k) for k in DISTANCE_KINDS]
                    gap = bias_summary(good)
                    for i in range(qs[0].values.shape[0]):
                        quant.append(key + [i + 1] + [repr(c.at(i + 1)) for c in qs])
                        bias.append(key + [i + 1, repr(float(gap[i]))])
    cell = ["method", "model", "sigma", "replicates"]
    atomic_write(out / "results.csv", format_rows(raw, RESULT_HEADER))
    atomic_write(out / "quantiles.csv",
                 format_rows(quant, cell + ["eval_index"] + [f"q95_{k}" for k in DISTANCE_KINDS]))
    atomic_write(out / "bias.csv", format_rows(bias, cell + ["eval_index", "mean_gap"]))
    atomic_write(out / "failures.csv", format_rows(failures, cell + ["path", "error"]))
    atomic_write(out / "timing.csv", timing_table(timings, cfg.methods))
    atomic_write(out / "config.json", cfg.dumps())
    print(f"wrote {len(raw)} result rows to {out / 'results.csv'}")
    if failures:
        print(f"{len(failures)} path(s) failed; see {out / 'failures.csv'}", file=sys.stderr)
    return EXIT_OK


# -- plot -----------------------------------------------------------------------


def read_results(text: str) -> dict:
    """Group raw result rows into ``{(model, sigma, l): {method: {path: [(i, obs, act, inc)]}}}``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != RESULT_HEADER:
        raise SchemaMismatch(f"results header must be {','.join(RESULT_HEADER)}")
    cells = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(RESULT_HEADER):
            raise SchemaMismatch(f"line {lineno}: expected {len(RESULT_HEADER)} fields")
        try:
            method, model, sigma, l = row[0], int(row[1]), float(row[2]), int(row[3])
            path, i = int(row[4]), int(row[5])
            dists = tuple(float(v) for v in row[6:])
        except ValueError as exc:
            raise SchemaMismatch(f"line {lineno}: {exc}") from None
        cells[(model, sigma, l)][method][path].append((i,) + dists)
    return cells


def quantile_series(paths: dict, q: float, kind: str):
    col = 1 + DISTANCE_KINDS.index(kind)
    n = max(len(v) for v in paths.values())
    full = [sorted(v) for v in paths.values() if len(v) == n]
    vals = np.array([[r[col] for r in rows] for rows in full])
    return list(range(1, n + 1)), np.quantile(vals, q, axis=0, method="linear").tolist()


def cmd_plot(args) -> int:
    path = Path(args.results) if args.results else Path(args.out or default_out()) / "results.csv"
    cells = read_results(path.read_text())
    if not cells:
        raise SchemaMismatch("results file has no rows")
    out = Path(args.out or path.parent)
    written = []
    for (model, sigma, l), methods in sorted(cells.items()):
        series = {m: quantile_series(paths, args.quantile, args.kind) for m, paths in methods.items()}
        title = f"model {model}, sd {sigma:g}, {l} repetition{'s' if l > 1 else ''}"
        svg = line_chart(series, title, "evaluation points",
                         f"{args.quantile:g}-quantile of min {args.kind} distance")
        name = f"model{model}_sigma{sigma:g}_l{l}.svg"
        written.append(atomic_write(out / name, svg))
    for w in written:
        print(w)
    return EXIT_OK


# -- suggest / observe -------------------------------------------------------------


def cmd_init_design(args) -> int:
    t, h = _floats(args.target, "--target"), _floats(args.halfwidth, "--halfwidth")
    lower, upper = _floats(args.lower, "--lower"), _floats(args.upper, "--upper")
    res = _floats(args.resolution, "--resolution") if args.resolution else None
    try:
        target = TargetSpec(t, h)
        space = ParameterSpace(lower, upper, res)
        approach = ApproachConfig(args.approach)
        state = session.init_state(target, space, approach, args.replicates, args.design,
                                   args.size, args.seed if args.seed is not None else 0)
    except ValueError as exc:
        raise ConfigError(str(exc), "init-design") from None
    out = Path(args.out or default_out())
    state_path = Path(args.state) if args.state else out / "state.json"
    atomic_write(state_path, state.dumps())
    atomic_write(out / "suggestions.csv", session.suggestions_csv(state, session._owed(state)))
    print(out / "suggestions.csv")
    return EXIT_OK


def _read_state(args) -> tuple:
    path = Path(args.state) if args.state else Path(args.out or default_out()) / "state.json"
    try:
        return path, path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc), "--state") from None


def _read_measurements(args) -> str:
    if not args.measurements:
        return ""
    try:
        return Path(args.measurements).read_text()
    except OSError as exc:
        raise ConfigError(str(exc), "--measurements") from None


def cmd_suggest(args) -> int:
    state_path, text = _read_state(args)
    new_state, suggestions = session.suggest_observe_step(text, _read_measurements(args))
    out = Path(args.out) if args.out else state_path.parent
    atomic_write(state_path, new_state)
    atomic_write(out / "suggestions.csv", suggestions)
    print(out / "suggestions.csv")
    return EXIT_OK


def cmd_observe(args) -> int:
    state_path, text = _read_state(args)
    state = session.SessionState.loads(text)
    added = session.ingest(state, _read_measurements(args))
    atomic_write(state_path, state.dumps())
    print(f"stored {added} new measurement(s)")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="targetopt", description="Sequential target optimization.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="study config (JSON)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
        p.add_argument("--paths", type=int, help="number of simulation paths override")
        p.add_argument("--threads", type=int, default=1, help="worker processes for simulation paths")

    p = sub.add_parser("bench", help="run a simulation study")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="draw quantile curves from bench results")
    common(p)
    p.add_argument("--results", help="results.csv (default <out>/results.csv)")
    p.add_argument("--kind", choices=DISTANCE_KINDS, default="actual")
    p.add_argument("--quantile", type=float, default=0.95)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("init-design", help="start a suggest/observe session")
    common(p)
    p.add_argument("--target", required=True, help="target descriptor values, comma separated")
    p.add_argument("--halfwidth", default="0.1", help="acceptance half-widths (one value or one per descriptor)")
    p.add_argument("--lower", required=True, help="lower parameter bounds")
    p.add_argument("--upper", required=True, help="upper parameter bounds")
    p.add_argument("--resolution", help="smallest distinguishable step per parameter")
    p.add_argument("--approach", type=int, default=3)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--design", choices=("latin-hypercube", "uniform-random"), default="latin-hypercube")
    p.add_argument("--size", type=int, default=4, help="number of initial points")
    p.add_argument("--state", help="state file (default <out>/state.json)")
    p.set_defaults(func=cmd_init_design)

    for name, func, text in (("suggest", cmd_suggest, "ingest measurements and suggest the next points"),
                             ("observe", cmd_observe, "ingest measurements only")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--state", help="state file (default <out>/state.json)")
        p.add_argument("--measurements", help="measurement rows p1..pP,d1..dD,point_id,replicate")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "threads", 1) is not None and args.threads < 1:
            raise ConfigError("must be >= 1", "--threads")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TargetOptError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
