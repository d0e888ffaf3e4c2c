"""Run configuration: a sectioned ``key = value`` text file.

Example::

    [dims]
    v = 4
    q = 4
    a = 4
    d_v = 8
    d_q = 8
    d_a = 8
    d_z = 16
    R = 1

    [data]
    task = mc
    n_train = 2000
    n_test = 500
    seed = 0

    [training]
    step_size = 0.5
    batch = 64
    epochs = 20
    seed = 0
    normalize = softmax
    alpha = 0.5
    temperature = 3.0

    [paths]
    data = data
    out = runs/teacher

Unknown sections or keys are rejected so that typos do not silently fall
back to defaults.  ``alpha`` has a default for the library but a distillation
run requires it to be written out (see :meth:`RunConfig.require_alpha`).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .paralind import check_slicing
from .tasks.data import DataSpec
from .tasks.train import TrainConfig

__all__ = ["RunConfig", "load_config", "parse_config"]

_DIMS = {"v": int, "q": int, "a": int, "d_v": int, "d_q": int, "d_a": int, "d_z": int, "r": int}
_DATA = {"task": str, "n_train": int, "n_test": int, "n_answers": int, "n_classes": int,
         "type_mix": "floats", "core_rank": int, "channel_noise": float, "seed": int}
_TRAINING = {"step_size": float, "batch": int, "epochs": int, "seed": int, "alpha": float,
             "temperature": float, "clip_norm": "optfloat", "normalize": str}
_PATHS = {"data": str, "out": str, "teacher": str, "checkpoint": str}
_SECTIONS = {"dims": _DIMS, "data": _DATA, "training": _TRAINING, "paths": _PATHS}


def _convert(section, key, raw, kind):
    try:
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if kind == "optfloat":
            return None if raw.strip().lower() in ("none", "off", "") else float(raw)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {getattr(kind, '__name__', kind)}") from None


@dataclass(frozen=True)
class RunConfig:
    dims: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        spec = self.data_spec()
        cfg = self.train_config()
        check_slicing(spec.dims, cfg.R)

    def data_spec(self) -> DataSpec:
        d, s = self.dims, self.data
        base = DataSpec(task=s.get("task", "mc"))
        kwargs = {k: s[k] for k in ("n_train", "n_test", "n_answers", "n_classes", "type_mix", "core_rank",
                                    "channel_noise") if k in s}
        kwargs["channels"] = tuple(d.get(k, c) for k, c in zip("vqa", base.channels))
        kwargs["dims"] = tuple(d.get(k, c) for k, c in zip(("d_v", "d_q", "d_a"), base.dims))
        return replace(base, **kwargs)

    @property
    def data_seed(self) -> int:
        return self.data.get("seed", 0)

    def train_config(self) -> TrainConfig:
        t = self.training
        kwargs = {"d_z": self.dims.get("d_z", TrainConfig.d_z), "R": self.dims.get("r", TrainConfig.R)}
        for key, name in (("step_size", "step_size"), ("batch", "batch_size"), ("epochs", "epochs"),
                          ("seed", "seed"), ("alpha", "alpha"), ("temperature", "temperature"),
                          ("clip_norm", "clip_norm"), ("normalize", "normalize")):
            if key in t:
                kwargs[name] = t[key]
        cfg = TrainConfig(**kwargs)
        if cfg.normalize not in ("none", "softmax"):
            raise ConfigError(f"[training] normalize must be 'none' or 'softmax', got {cfg.normalize!r}")
        return cfg

    def require_alpha(self) -> float:
        if "alpha" not in self.training:
            raise ConfigError("distillation needs an explicit [training] alpha (mixing weight of the soft loss)")
        return self.training["alpha"]

    def with_overrides(self, section: str, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return replace(self, **{section: {**getattr(self, section), **values}})

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for name in _SECTIONS:
            sec = dict(getattr(self, name))
            if "type_mix" in sec:
                sec["type_mix"] = list(sec["type_mix"])
            out[name] = sec
        return out


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]; expected one of {sorted(_SECTIONS)}")
        for key, raw in parser.items(name):
            if key not in _SECTIONS[name]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{name}]")
            sections[name][key] = _convert(name, key, raw, _SECTIONS[name][key])
    return RunConfig(**sections)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"config file {path} does not exist") from None
    return parse_config(text, str(path))
