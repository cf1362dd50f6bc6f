"""Study configuration for ``targetopt bench``, stored as versioned JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .baselines import Nsga2Config
from .errors import ConfigError
from .simbench import DEFAULT_ANCHOR, DEFAULT_HALFWIDTH, METHODS, MODEL_IDS

CONFIG_VERSION = 1


@dataclass
class StudyConfig:
    """Cross of methods x models x noise levels x replicate counts.

    Every path gets ``4 + r`` evaluation points.
    """

    methods: list = field(default_factory=lambda: ["approach3"])
    models: list = field(default_factory=lambda: [1])
    sigmas: list = field(default_factory=lambda: [0.0])
    replicates: list = field(default_factory=lambda: [1])
    r: int = 40
    n_paths: int = 100
    seed: int = 0
    out: str = "results"
    anchor: list = field(default_factory=lambda: list(DEFAULT_ANCHOR))
    halfwidth: float = DEFAULT_HALFWIDTH
    nsga2: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(msg, name)

        for name in ("methods", "models", "sigmas", "replicates"):
            v = getattr(self, name)
            need(isinstance(v, list) and len(v) > 0, name, "must be a non-empty list")
        for m in self.methods:
            need(m in METHODS, "methods", f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for m in self.models:
            need(isinstance(m, int) and not isinstance(m, bool) and m in MODEL_IDS, "models",
                 f"unknown model id {m!r}; choose from {', '.join(map(str, MODEL_IDS))}")
        for s in self.sigmas:
            need(isinstance(s, (int, float)) and not isinstance(s, bool) and s >= 0, "sigmas",
                 f"noise sd must be a number >= 0, got {s!r}")
        for l in self.replicates:
            need(isinstance(l, int) and not isinstance(l, bool) and l >= 1, "replicates",
                 f"replicate count must be an integer >= 1, got {l!r}")
        need(isinstance(self.r, int) and self.r >= 0, "r", "must be an integer >= 0")
        need(isinstance(self.n_paths, int) and self.n_paths >= 1, "n_paths", "must be an integer >= 1")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be an integer >= 0")
        need(isinstance(self.out, str) and self.out != "", "out", "must be a non-empty path")
        need(isinstance(self.anchor, list) and len(self.anchor) == 2
             and all(isinstance(a, (int, float)) and -5 <= a <= 5 for a in self.anchor),
             "anchor", "must be two numbers inside [-5, 5]")
        need(isinstance(self.halfwidth, (int, float)) and self.halfwidth > 0, "halfwidth", "must be > 0")
        need(isinstance(self.nsga2, dict), "nsga2", "must be an object")
        try:
            self.nsga2_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "nsga2") from None

    def nsga2_config(self) -> Nsga2Config:
        return Nsga2Config(**self.nsga2)

    def to_dict(self) -> dict:
        return {"schema_version": CONFIG_VERSION, **asdict(self)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data) -> "StudyConfig":
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", "<root>")
        version = data.get("schema_version")
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported version {version!r}, expected {CONFIG_VERSION}",
                              "schema_version")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known - {"schema_version"})
        if extra:
            raise ConfigError("unknown field", extra[0])
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def loads(cls, text: str) -> "StudyConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                              "<file>") from None
        return cls.from_dict(data)
