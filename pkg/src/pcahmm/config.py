"""Pipeline configuration.

Defaults reproduce the reference parameterization: 512-sample windows with
a 32-sample hop, ten principal components per channel, an elbow scan over
k = 1..10 and a one-sided z threshold of -2.33.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .ingest import DEFAULT_SAMPLE_RATE_HZ, IMS_SET1_CHANNELS


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    dataset_root: str | None = None
    channel_map: dict[str, list[int]] = field(default_factory=lambda: {k: list(v) for k, v in IMS_SET1_CHANNELS.items()})
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    window_len: int = 512
    hop: int = 32
    p: int = 10
    center: bool = True
    k_range: tuple[int, int] = (1, 10)
    states: int | None = None
    seed: int = 0
    restarts: int = 10
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6
    # elbow scan and k-means run on an evenly strided subset of the pooled windows
    cluster_max_points: int | None = 20000
    hmm_tol: float = 1e-6
    hmm_max_iter: int = 200
    threshold: float = -2.33
    sustained: int = 3
    training_range: tuple[int, int] | None = None

    def __post_init__(self):
        self.k_range = tuple(int(v) for v in self.k_range)
        if self.training_range is not None:
            self.training_range = tuple(int(v) for v in self.training_range)
        self.channel_map = {str(k): [int(c) for c in v] for k, v in self.channel_map.items()}
        self.validate()

    def validate(self) -> None:
        if len(self.k_range) != 2 or self.k_range[0] > self.k_range[1]:
            raise ConfigError(f"k_range must be an ascending pair, got {self.k_range}")
        if self.training_range is not None and len(self.training_range) != 2:
            raise ConfigError("training_range must be a [first, last] pair")
        if self.p < 1 or self.window_len < 2 or self.hop < 1:
            raise ConfigError("p, window_len and hop must be positive")
        if self.sustained < 1:
            raise ConfigError("sustained alarm count must be >= 1")
        if self.restarts < 1 or self.hmm_max_iter < 1:
            raise ConfigError("restarts and hmm_max_iter must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["k_range"] = list(self.k_range)
        if self.training_range is not None:
            out["training_range"] = list(self.training_range)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "PipelineConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with the non-None overrides applied (CLI flags win over the file)."""
        merged = self.to_dict()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(merged)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {str(path)!r} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {str(path)!r} must hold a mapping")
    return PipelineConfig.from_dict(data)


def dump_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
