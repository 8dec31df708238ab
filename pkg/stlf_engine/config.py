"""Training/model configuration and its flat ``key=value`` file format."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import UsageError
from .settings import DEFAULT_SEED


def _parse_schedule(raw: Any) -> Dict[int, float]:
    if isinstance(raw, Mapping):
        return {int(k): float(v) for k, v in raw.items()}
    if isinstance(raw, str):
        out: Dict[int, float] = {}
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            epoch, _, value = part.partition(":")
            out[int(epoch)] = float(value)
        return out
    raise TypeError(f"cannot read schedule from {raw!r}")


def _format_schedule(schedule: Mapping[int, float], as_int: bool = False) -> str:
    return ",".join(f"{k}:{int(v) if as_int else repr(float(v))}" for k, v in sorted(schedule.items()))


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # loss
    q_point: float = 0.485
    q_low: float = 0.035
    q_up: float = 0.96
    gamma: float = 0.3

    # schedule
    epochs: int = 9
    updates_per_epoch: int = 2500
    steps_per_batch: int = 50
    batch_schedule: Dict[int, int] = Field(default_factory=lambda: {1: 2, 4: 5})
    lr_schedule: Dict[int, float] = Field(default_factory=lambda: {1: 3e-3, 5: 1e-3, 6: 3e-4, 7: 1e-4})
    warmup_weeks_train: int = 3
    warmup_weeks_test: int = 5
    clip_norm: Optional[float] = None

    # model
    state_size: int = 100
    h_size: int = 40
    output_size: int = 40
    embed_size: int = 10
    shortcuts: bool = True
    alpha_logit_init: float = -3.5
    beta_logit_init: float = -3.5

    # ensemble
    ensemble_members: int = 5
    ensemble_combine: Literal["mean", "median"] = "mean"

    seed: int = DEFAULT_SEED

    @field_validator("batch_schedule", mode="before")
    @classmethod
    def _batch_schedule(cls, v: Any) -> Dict[int, int]:
        return {k: int(val) for k, val in _parse_schedule(v).items()}

    @field_validator("lr_schedule", mode="before")
    @classmethod
    def _lr_schedule(cls, v: Any) -> Dict[int, float]:
        return _parse_schedule(v)

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if not (0.0 < self.q_low < self.q_point < self.q_up < 1.0):
            raise ValueError("quantile orders must satisfy 0 < q_low < q_point < q_up < 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        for name in ("epochs", "updates_per_epoch", "steps_per_batch", "state_size", "h_size", "output_size", "embed_size", "ensemble_members"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup_weeks_train < 0 or self.warmup_weeks_test < 0:
            raise ValueError("warm-up weeks must be >= 0")
        if self.output_size + self.h_size > self.state_size:
            raise ValueError("output_size + h_size must not exceed state_size")
        for name in ("batch_schedule", "lr_schedule"):
            schedule = getattr(self, name)
            if 1 not in schedule:
                raise ValueError(f"{name} must define epoch 1")
            if any(v <= 0 for v in schedule.values()):
                raise ValueError(f"{name} values must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when set")
        return self

    def lr_for(self, epoch: int) -> float:
        return float(self.lr_schedule[max(k for k in self.lr_schedule if k <= epoch)])

    def batch_size_for(self, epoch: int) -> int:
        return int(self.batch_schedule[max(k for k in self.batch_schedule if k <= epoch)])

    def to_flat(self) -> Dict[str, str]:
        flat: Dict[str, str] = {}
        for key, value in self.model_dump().items():
            if key == "batch_schedule":
                flat[key] = _format_schedule(value, as_int=True)
            elif key == "lr_schedule":
                flat[key] = _format_schedule(value)
            elif value is None:
                flat[key] = "none"
            else:
                flat[key] = str(value).lower() if isinstance(value, bool) else str(value)
        return flat


def parse_config_text(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def build_config(
    file_values: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """Layer defaults < config file < explicit overrides (CLI flags)."""
    merged: Dict[str, Any] = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in TrainConfig.model_fields:
                raise UsageError(f"unknown config key: {key}")
            if key == "clip_norm" and isinstance(value, str) and value.lower() in {"", "none", "off"}:
                value = None
            merged[key] = value
    try:
        return TrainConfig(**merged)
    except ValidationError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def load_config(path: Optional[str | Path] = None, **overrides: Any) -> TrainConfig:
    file_values = None
    if path:
        try:
            file_values = parse_config_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return build_config(file_values, overrides)
