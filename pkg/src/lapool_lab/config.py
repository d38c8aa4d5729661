"""Run configuration: one YAML/JSON file plus ``--set`` overrides, parsed strictly.

Every section is a dataclass; unknown keys and wrongly typed values are hard
errors. Section seeds that are not given explicitly inherit the global seed.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import Motif, MotifTask
from .model import ModelConfig
from .pooling import PoolConfig
from .signal_demo import DemoConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSection:
    count: int = 500
    dir: str | None = None  # load this dataset directory instead of generating
    task: MotifTask = field(default_factory=MotifTask)


@dataclass(frozen=True)
class EvalSection:
    checkpoint: str | None = None


@dataclass(frozen=True)
class PoolSection:
    graph: str | None = None
    config: PoolConfig = field(default_factory=PoolConfig)


@dataclass(frozen=True)
class ExplainSection:
    checkpoint: str | None = None
    graph: str | None = None
    target: int = 0
    steps: int = 256
    adjacency: bool = True
    objective: str = "logit"


@dataclass(frozen=True)
class GradcheckSection:
    points: int = 100
    eps: float = 1e-5


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str | None = None
    data: DataSection = field(default_factory=DataSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    pool: PoolSection = field(default_factory=PoolSection)
    explain: ExplainSection = field(default_factory=ExplainSection)
    signal_demo: DemoConfig = field(default_factory=DemoConfig)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)


# dotted paths that default to the global seed
SEEDED = ("data.task.seed", "model.seed", "train.seed", "signal_demo.seed_offset")


# ---------------------------------------------------------------- strict parsing


def _coerce(hint, value, path: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{path}: null is not allowed")
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(arg, value, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError("; ".join(errors))
    if dataclasses.is_dataclass(hint):
        if isinstance(value, hint):
            return value
        return from_mapping(hint, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        args = typing.get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"{path}: expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {hint!r}")


def from_mapping(cls, data, path: str = ""):
    """Build dataclass ``cls`` from a plain mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown config key {where}{unknown[0]}")
    kwargs = {k: _coerce(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path or '<root>'}: {exc}") from exc


def to_plain(obj):
    """Dataclasses and tuples to JSON-ready dicts and lists."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    return obj


# ---------------------------------------------------------------- overrides


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from exc
    return key, value


def _has(tree: dict, dotted: str) -> bool:
    node = tree
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return False
        node = node[part]
    return True


def set_dotted(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for i, part in enumerate(parts[:-1]):
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {dotted}: {'.'.join(parts[: i + 1])} is not a section")
        node = nxt
    node[parts[-1]] = value


def load_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def resolve(raw: dict | None = None, overrides=(), seed: int | None = None, out: str | None = None) -> RunConfig:
    """File contents, then ``--set`` overrides, then ``--seed``/``--out`` flags."""
    tree = json.loads(json.dumps(raw or {}))
    for text in overrides:
        set_dotted(tree, *parse_override(text))
    if seed is not None:
        tree["seed"] = seed
    if out is not None:
        tree["out"] = out
    base = tree.get("seed", 0)
    for dotted in SEEDED:
        if not _has(tree, dotted):
            set_dotted(tree, dotted, base)
    return from_mapping(RunConfig, tree)


def dump_resolved(cfg: RunConfig) -> str:
    return json.dumps(to_plain(cfg), indent=2, sort_keys=True) + "\n"


__all__ = [
    "ConfigError",
    "DataSection",
    "EvalSection",
    "ExplainSection",
    "GradcheckSection",
    "Motif",
    "PoolSection",
    "RunConfig",
    "dump_resolved",
    "from_mapping",
    "load_file",
    "parse_override",
    "resolve",
    "to_plain",
]
