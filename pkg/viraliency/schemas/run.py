"""
RunConfig: the single JSON config file consumed by `train`, `gradcheck` and `sweep`.

Keys are one-to-one with CLI flags; see viraliency.commands.common.add_run_config_flags.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from viraliency.core.exceptions import ConfigError
from viraliency.schemas.model import ModelConfig
from viraliency.schemas.train import TrainConfig


class PathsConfig(BaseModel):
    """Input and output locations."""

    model_config = ConfigDict(extra="forbid")

    dataset_dir: str = Field(default="data/synthetic", description="Dataset directory")
    train_pairs: str = Field(
        default="pairs_train.csv",
        description="Training pairs CSV (relative to dataset_dir)"
    )
    test_pairs: str = Field(
        default="pairs_test.csv",
        description="Test pairs CSV (relative to dataset_dir)"
    )
    side_maps_dir: Optional[str] = Field(
        default=None,
        description="Directory of <id>.npy side maps (relative to dataset_dir)"
    )
    checkpoint: str = Field(default="model.lena", description="Checkpoint file name")
    output_dir: str = Field(default="runs/default", description="Output directory")

    def dataset_path(self, name: str) -> Path:
        return Path(self.dataset_dir) / name

    def output_path(self, name: str) -> Path:
        return Path(self.output_dir) / name


class RunConfig(BaseModel):
    """Model + training + paths; unknown keys are rejected at every level."""

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    threads: Optional[int] = Field(
        default=None,
        ge=1,
        description="Worker threads (falls back to LENA_THREADS)"
    )


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Build a RunConfig with precedence overrides > file > defaults.

    Args:
        path: optional JSON config file
        overrides: nested dict of explicitly given flag values

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown keys or invalid values
    """
    raw: Dict[str, Any] = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path} at line {e.lineno} column {e.colno}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    merged = _deep_merge(raw, overrides or {})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{location}: {first['msg']} ({e.error_count()} error(s))")
