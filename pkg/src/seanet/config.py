"""Run configuration: defaults, YAML loading, dotted overrides, validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from .data import IMAGENET_MEAN, IMAGENET_STD
from .model import Ablation


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    root: str | None = None
    name: str = "EORSSD"
    train_split: str = "train"
    test_split: str = "test"


@dataclass
class AugmentConfig:
    hflip: bool = True
    vflip: bool = True
    rotate: bool = True
    max_angle: float | None = None  # None: right-angle rotations only


@dataclass
class NormalizationConfig:
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD


@dataclass
class Config:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    ablation: Ablation = field(default_factory=Ablation)
    input_size: int = 288
    width: float = 1.0
    batch_size: int = 8
    optimizer: str = "adam"
    base_lr: float = 1e-4
    lr_decay: float = 0.1
    lr_step: int = 30
    epochs: int = 50
    lam: float = 0.5
    seed: int = 0
    dropout: float = 0.1
    iou_eps: float = 1.0
    pool_kernel: int = 3
    pretrained: bool = True
    backbone_weights: str | None = None
    workers: int = 0
    out_dir: str = "runs/seanet"
    max_steps: int | None = None
    device: str = "cpu"

    @property
    def effective_lam(self) -> float:
        return 0.0 if self.ablation.no_alignment else self.lam

    def validate(self) -> "Config":
        checks = [
            (self.input_size > 0 and self.input_size % 32 == 0, "input_size must be a positive multiple of 32"),
            (0 < self.width <= 1, "width must be in (0, 1]"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.optimizer == "adam", "only optimizer=adam is supported"),
            (self.base_lr > 0, "base_lr must be positive"),
            (0 < self.lr_decay <= 1, "lr_decay must be in (0, 1]"),
            (self.lr_step >= 1, "lr_step must be >= 1"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.lam >= 0, "lam must be non-negative"),
            (0 <= self.dropout < 1, "dropout must be in [0, 1)"),
            (self.iou_eps > 0, "iou_eps must be positive"),
            (self.pool_kernel >= 1 and self.pool_kernel % 2 == 1, "pool_kernel must be odd"),
            (self.max_steps is None or self.max_steps >= 1, "max_steps must be >= 1"),
            (len(self.normalization.mean) == 3 and len(self.normalization.std) == 3
             and min(self.normalization.std) > 0, "normalization needs 3 means and 3 positive stds"),
        ]
        errors = [msg for ok, msg in checks if not ok]
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data: dict, path: str = ""):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys at {path or 'top level'}: {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{path}{name}.")
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def from_dict(data: dict | None) -> Config:
    return _build(Config, data or {}).validate()


def _set_dotted(data: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> Config:
    """Read a YAML config (optional) and apply ``key.sub=value`` overrides."""
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        data = loaded or {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        _set_dotted(data, key.strip(), yaml.safe_load(raw))
    return from_dict(data)
