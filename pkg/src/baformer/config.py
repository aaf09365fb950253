"""Whole-run configuration: one JSON object with five optional sections."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data import SynthConfig
from .errors import ConfigError
from .model import ModelConfig
from .objective import LossWeights
from .training import BOUNDARY_SOURCES, VOTING_MODES, TrainConfig


@dataclass
class InferenceConfig:
    voting: str = "query"
    boundary: str = "peak"
    nms_window: int = 8
    min_prob: float | None = None

    def validate(self):
        if self.voting not in VOTING_MODES:
            raise ConfigError(f"inference.voting must be one of {VOTING_MODES}")
        if self.boundary not in BOUNDARY_SOURCES:
            raise ConfigError(f"inference.boundary must be one of {BOUNDARY_SOURCES}")
        if self.nms_window < 0:
            raise ConfigError("inference.nms_window must be >= 0")


SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "loss": LossWeights,
    "data": SynthConfig,
    "inference": InferenceConfig,
}


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    data: SynthConfig = field(default_factory=SynthConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def validate(self):
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        built = {}
        for name, klass in SECTIONS.items():
            section = raw.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config section {name!r} must be an object")
            allowed = {f.name for f in fields(klass)}
            bad = set(section) - allowed
            if bad:
                raise ConfigError(f"unknown key(s) in {name}: {sorted(bad)}")
            try:
                built[name] = klass(**section)
            except TypeError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        return cls(**built)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(raw).validate()


def dump_config(cfg: RunConfig, path):
    from .data import _atomic_write

    _atomic_write(path, (json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8"))
