"""Run configuration.

Every tunable of the pipeline lives here.  Operations receive their values
from a :class:`RunConfig` (or explicit arguments); nothing downstream
hard-codes a default that also appears in this file.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

ELEMENT_KINDS = (
    "space",
    "wall",
    "curtain_wall",
    "door",
    "window",
    "ceiling_fan",
    "stand_fan",
    "ac_outlet",
    "stair_landing",
    "furniture",
)

DEFAULT_AOI_RADII: dict[str, float] = {
    "ceiling_fan": 2.5,
    "stand_fan": 1.5,
    "window": 2.0,
    "door": 1.5,
    "ac_outlet": 2.0,
    "wall": 1.0,
    "curtain_wall": 2.0,
    "stair_landing": 1.5,
    "furniture": 1.0,
}

SEED_NAMES = ("mesh", "walks", "embed", "zoning", "conditions", "sim")


class ConfigError(ValueError):
    """Configuration failed schema validation; message carries the field path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Paths(_Strict):
    floor_plan: str | None = None
    output_dir: str = "out"


class WalkConfig(_Strict):
    length: int = Field(50, ge=1)
    per_node: int = Field(50, ge=1)


class EmbeddingConfig(_Strict):
    dim: int = Field(50, ge=1)
    window: int = Field(30, ge=1)
    epochs: int = Field(5, ge=0)
    negatives: int = Field(5, ge=0)
    lr: float = Field(0.025, gt=0)
    kind_hubs: bool = True
    adjacency: bool = True


class TriggerConfig(_Strict):
    cooldown: float = Field(900.0, ge=0)
    y: int = Field(1, ge=1)
    x: int = Field(10, ge=1)
    fine_tune: bool = False
    fine_tune_rate: float = Field(0.05, gt=0, le=1)


class CochranConfig(_Strict):
    population: int = Field(650, ge=1)
    margin: float = Field(0.11, gt=0, lt=1)
    confidence: float = Field(0.90, gt=0, lt=1)
    p: float = Field(0.5, gt=0, lt=1)


class SimulationConfig(_Strict):
    days: int = Field(14, ge=1)
    occupants: int = Field(10, ge=0)
    step: float = Field(60.0, gt=0)
    policy: str = "adaptive"
    fixed_interval: float = Field(3600.0, gt=0)
    response_probability: float = Field(0.9, ge=0, le=1)
    max_response_delay: float = Field(120.0, ge=0)
    response_cap: int = Field(80, ge=0)
    dwell_mean: float = Field(2700.0, gt=0)
    walking_speed: float = Field(1.0, gt=0)
    temp_mean: float = 30.0
    temp_amplitude: float = Field(3.0, ge=0)
    temp_noise: float = Field(0.5, ge=0)
    temp_peak_hour: float = Field(14.0, ge=0, lt=24)
    calibration_days: int = Field(1, ge=1)

    @field_validator("policy")
    @classmethod
    def _known_policy(cls, v: str) -> str:
        if v not in ("adaptive", "fixed_interval"):
            raise ValueError("policy must be 'adaptive' or 'fixed_interval'")
        return v


class Seeds(_Strict):
    mesh: int = Field(0, ge=0, lt=2**64)
    walks: int = Field(1, ge=0, lt=2**64)
    embed: int = Field(2, ge=0, lt=2**64)
    zoning: int = Field(3, ge=0, lt=2**64)
    conditions: int = Field(4, ge=0, lt=2**64)
    sim: int = Field(5, ge=0, lt=2**64)


class RunConfig(_Strict):
    paths: Paths = Paths()
    cell_size: float = Field(0.5, gt=0)
    k_zones: int = Field(20, ge=1)
    k_conditions: int = Field(10, ge=1)
    walk: WalkConfig = WalkConfig()
    embedding: EmbeddingConfig = EmbeddingConfig()
    trigger: TriggerConfig = TriggerConfig()
    grid_square: float = Field(4.0, gt=0)
    aoi_radii: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_AOI_RADII))
    seeds: Seeds = Seeds()
    cochran: CochranConfig = CochranConfig()
    simulation: SimulationConfig = SimulationConfig()

    @field_validator("aoi_radii")
    @classmethod
    def _valid_radii(cls, v: dict[str, float]) -> dict[str, float]:
        for kind, radius in v.items():
            if kind not in ELEMENT_KINDS or kind == "space":
                raise ValueError(f"unknown element kind {kind!r}")
            if not radius > 0:
                raise ValueError(f"radius for {kind!r} must be > 0")
        return {**DEFAULT_AOI_RADII, **v}

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; paths are excluded."""
        payload = self.model_dump(mode="json", exclude={"paths"})
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def config_schema() -> dict[str, Any]:
    return RunConfig.model_json_schema()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def load_config(data: dict[str, Any] | str | Path | None = None, **overrides: Any) -> RunConfig:
    """Build a RunConfig from a dict or JSON file, applying dotted overrides.

    ``overrides`` keys use ``__`` as path separator, e.g.
    ``load_config(path, seeds__walks=7)``.
    """
    if data is None:
        raw: dict[str, Any] = {}
    elif isinstance(data, (str, Path)):
        raw = json.loads(Path(data).read_text())
    else:
        raw = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        _set_path(raw, dotted.split("__"), value)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def _set_path(raw: dict[str, Any], keys: list[str], value: Any) -> None:
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value
