"""Experiment configuration: one JSON document, unknown keys rejected."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

from ..model.encoder import AGGREGATORS, VARIANTS
from ..synth.generate import DatasetConfig

EVAL_SEEDS = (17, 33, 66, 74, 98, 137, 265, 314, 590, 788)
LEARNING_RATES = (1e-4, 3e-5)
O_MAX_CHOICES = (2, 4, 8)


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    variant: str = "OSE-pixel/disp+OME+OIE"
    aggregator: str = "mean"
    o_max: int = 8
    d_c: int = 128
    d_m: int = 64
    heads: int = 4


@dataclass
class OptimSection:
    lr: float = 1e-4
    batch_size: int = 8
    epochs: int = 10


@dataclass
class RoleSection:
    lr: float = 1e-4
    epochs: int = 10
    batch_videos: int = 8
    predicted_verbs: bool = False   # condition decoding on argmax verbs instead of gold ones


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelSection = field(default_factory=ModelSection)
    optim: OptimSection = field(default_factory=OptimSection)
    role: RoleSection = field(default_factory=RoleSection)
    eval_seeds: list[int] = field(default_factory=lambda: list(EVAL_SEEDS))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        problems: list[str] = []
        cfg = _build(cls, data, "", problems)
        problems += cfg.problems()
        if problems:
            raise ConfigError("invalid config: " + "; ".join(problems))
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data)

    def problems(self) -> list[str]:
        out = []
        m, o, r = self.model, self.optim, self.role
        if m.variant not in VARIANTS:
            out.append(f"model.variant={m.variant!r} not in {list(VARIANTS)}")
        if m.aggregator not in AGGREGATORS:
            out.append(f"model.aggregator={m.aggregator!r} not in {list(AGGREGATORS)}")
        if m.o_max not in O_MAX_CHOICES:
            out.append(f"model.o_max={m.o_max} not in {list(O_MAX_CHOICES)}")
        if m.d_m % m.heads:
            out.append(f"model.heads={m.heads} does not divide model.d_m={m.d_m}")
        if o.lr not in LEARNING_RATES:
            out.append(f"optim.lr={o.lr} not in {list(LEARNING_RATES)}")
        for name, value in (("optim.batch_size", o.batch_size), ("optim.epochs", o.epochs),
                            ("role.epochs", r.epochs), ("role.batch_videos", r.batch_videos)):
            if value < 1:
                out.append(f"{name}={value} must be >= 1")
        if r.lr <= 0:
            out.append(f"role.lr={r.lr} must be positive")
        if not self.eval_seeds:
            out.append("eval_seeds must not be empty")
        try:
            self.dataset.dims.validate()
        except ValueError as exc:
            out.append(f"dataset.dims: {exc}")
        return out


def _build(cls, data: Any, prefix: str, problems: list[str]):
    if not isinstance(data, dict):
        problems.append(f"{prefix.rstrip('.') or 'config'} must be an object")
        return cls()
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            problems.append(f"unknown field {prefix}{key}")
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        if name not in data:
            continue
        default = getattr(defaults, name)
        value = data[name]
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{prefix}{name}.", problems)
        else:
            kwargs[name] = _coerce(value, default, f"{prefix}{name}", problems)
    return cls(**kwargs)


def _coerce(value, default, path: str, problems: list[str]):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    else:
        ok = True
    if not ok:
        problems.append(f"{path}={value!r} has the wrong type (expected {type(default).__name__})")
        return default
    return value
