"""JSON run configuration with model / train / data sections."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .network import NetworkConfig


@dataclass
class ModelSection:
    rows: int = 17
    cols: int = 17
    classes: int = 3
    channels: int = 8
    rings: int = 2
    layers: int = 5
    variant: str = "paper"
    backbone: Optional[list] = None  # [[out_channels, kernel_size], ...]; default [[channels, 3]]


@dataclass
class TrainSection:
    lr_new: float = 2.5e-3
    lr_backbone: float = 2.5e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    steps: int = 1000
    seed: int = 0
    crop: Optional[int] = None


@dataclass
class DataSection:
    task: str = "context"
    size: int = 17
    cue_distance: int = 6
    count: int = 200


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)

    def network(self) -> NetworkConfig:
        m = self.model
        backbone = m.backbone if m.backbone is not None else [[m.channels, 3]]
        return NetworkConfig(image_rows=m.rows, image_cols=m.cols, num_classes=m.classes,
                             channels=m.channels, rings=m.rings, layers=m.layers,
                             variant=m.variant, backbone=backbone, seed=self.train.seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"model": ModelSection, "train": TrainSection, "data": DataSection}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    cfg = RunConfig(**{k: _build(cls, raw.get(k, {}), k) for k, cls in _SECTIONS.items()})
    cfg.network()  # validates the model section
    if cfg.train.momentum < 0 or cfg.train.momentum >= 1:
        raise ConfigError(f"momentum must be in [0, 1), got {cfg.train.momentum}")
    if cfg.train.weight_decay < 0 or cfg.train.lr_new <= 0 or cfg.train.lr_backbone <= 0:
        raise ConfigError("learning rates must be positive and weight decay non-negative")
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)
