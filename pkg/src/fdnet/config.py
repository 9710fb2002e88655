"""Run configuration: one JSON document, nested sections, strict keys.

Defaults reproduce the stable-case experiment (``dt = 1``, 1000 steps,
``k = 10``, batch 64, seed 46). ``UNSTABLE_OVERRIDES`` switches to the
coarse-step case used by the ``table1`` command.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass

from .diff import LossConfig
from .errors import ConfigError
from .heat_data import DEFAULT_NUM_MODES, Grid1D, PhysicsConfig
from .optim import AdamConfig, TrustRegionConfig

__all__ = [
    "RunConfig",
    "PhysicsSection",
    "DataSection",
    "ModelSection",
    "SamplerSection",
    "EvalSection",
    "Table1Section",
    "load_config",
    "apply_overrides",
    "config_from_dict",
    "UNSTABLE_OVERRIDES",
    "with_overrides",
]


@dataclass(frozen=True)
class PhysicsSection:
    beta: float = 0.0002
    dt: float = 1.0
    num_steps: int = 1000
    num_points: int = 31
    length: float = math.pi

    def build(self) -> PhysicsConfig:
        return PhysicsConfig(self.beta, self.dt, self.num_steps, Grid1D(self.num_points, self.length))


@dataclass(frozen=True)
class DataSection:
    num_samples: int = 200
    num_modes: int = DEFAULT_NUM_MODES
    coeff_seed: int = 0
    split_ratio: float = 0.75
    split_seed: int = 0


@dataclass(frozen=True)
class ModelSection:
    k: int = 10
    init_seed: int = 46
    init_scale: float = 0.003


@dataclass(frozen=True)
class SamplerSection:
    batch_size: int = 64
    seed: int = 46


@dataclass(frozen=True)
class EvalSection:
    snapshot_times: tuple = (0.0, 250.0, 500.0, 1000.0)
    snapshot_sample: int = 0
    trace_rmse: bool = True


@dataclass(frozen=True)
class Table1Section:
    dt: float = 200.0
    num_steps: int = 5
    batch_sizes: tuple = (32, 64, 128)
    ks: tuple = (1, 10, 20)
    epoch_budget: float = 30.0


@dataclass(frozen=True)
class RunConfig:
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: str = "trcg"
    sampler: SamplerSection = field(default_factory=SamplerSection)
    adam: AdamConfig = field(default_factory=AdamConfig)
    trcg: TrustRegionConfig = field(default_factory=TrustRegionConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    table1: Table1Section = field(default_factory=Table1Section)

    def validate(self) -> "RunConfig":
        if self.optimizer not in ("trcg", "adam"):
            raise ConfigError(f"optimizer must be 'trcg' or 'adam', got {self.optimizer!r}")
        if int(self.model.k) != self.model.k or self.model.k < 1:
            raise ConfigError(f"model.k must be a positive integer, got {self.model.k!r}")
        if not (math.isfinite(self.model.init_scale) and self.model.init_scale >= 0):
            raise ConfigError("model.init_scale must be finite and >= 0")
        if int(self.sampler.batch_size) != self.sampler.batch_size or self.sampler.batch_size < 1:
            raise ConfigError("sampler.batch_size must be a positive integer")
        if not self.table1.batch_sizes or not self.table1.ks:
            raise ConfigError("table1 grid must be nonempty")
        if any(int(k) != k or k < 1 for k in self.table1.ks):
            raise ConfigError("table1.ks must be positive integers")
        if not self.table1.epoch_budget > 0:
            raise ConfigError("table1.epoch_budget must be positive")
        self.physics.build()
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


UNSTABLE_OVERRIDES = {"physics.dt": 200.0, "physics.num_steps": 5}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name) if name != "optimizer" else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}" if where else name)
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}.{name} must be a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value in {where or 'config'}: {exc}") from exc


def config_from_dict(data) -> RunConfig:
    try:
        return _build(RunConfig, data, "").validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings (values parsed as JSON when possible)."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, raw = item.split("=", 1)
            value = _parse_value(raw)
        else:
            key, value = item
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-section")
        node[parts[-1]] = value
    return data


def load_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (or defaults when ``path`` is None) and apply overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(apply_overrides(data, overrides))


def with_overrides(cfg: RunConfig, overrides) -> RunConfig:
    if isinstance(overrides, dict):
        overrides = overrides.items()
    return config_from_dict(apply_overrides(cfg.to_dict(), overrides))

