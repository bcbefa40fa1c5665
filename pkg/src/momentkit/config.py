"""Pipeline settings and their JSON config file.

A config file is one JSON object whose keys are a subset of
:class:`PipelineConfig` fields; unknown keys are rejected. Defaults follow the
published hyperparameters (alpha 0.7 / 0.3, theta 0.95, one caption every
2 seconds).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .modulation import ModulationConfig
from .svc import SvcConfig


@dataclass(frozen=True)
class PipelineConfig:
    theta: float = 0.95
    rank_k: int = 1
    anchor_update: str = "compressed"
    alpha1: float = 0.7
    alpha2: float = 0.3
    vbar_form: str = "product"
    caption_interval_sec: float = 2.0
    mode: str = "SE"
    relevance_aggregation: str = "any"
    seed: int = 0
    max_vector_slots: int | None = None

    def __post_init__(self):
        # sub-configs validate their own fields
        self.svc()
        self.modulation()
        if not self.caption_interval_sec > 0:
            raise ConfigError("caption_interval_sec must be positive")
        if self.mode not in ("SE", "LE"):
            raise ConfigError(f"mode must be SE or LE, got {self.mode!r}")
        if self.relevance_aggregation not in ("any", "all"):
            raise ConfigError(f"relevance_aggregation must be any or all, got {self.relevance_aggregation!r}")
        if self.max_vector_slots is not None and self.max_vector_slots < 0:
            raise ConfigError("max_vector_slots must be non-negative")

    def svc(self) -> SvcConfig:
        return SvcConfig(self.theta, self.rank_k, self.anchor_update)

    def modulation(self) -> ModulationConfig:
        return ModulationConfig(self.alpha1, self.alpha2, self.vbar_form)

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with every non-``None`` override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
