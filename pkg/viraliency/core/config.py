"""
Process-level configuration from environment variables.

Run-specific knobs (model, training, paths) live in RunConfig; this module only
carries what is shared by every subcommand.
"""
import os
from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _machine_threads() -> int:
    return max(os.cpu_count() or 1, 1)


class Settings(BaseSettings):
    """Settings loaded from LENA_* environment variables (or .env)."""

    model_config = SettingsConfigDict(
        env_prefix="LENA_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    threads: int = Field(
        default_factory=_machine_threads,
        ge=1,
        le=256,
        description="Worker threads for per-batch fan-out (fallback for --threads)"
    )
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO",
        description="Root log level"
    )
    colormap_path: Optional[str] = Field(
        default=None,
        description="Path to a 256-entry colormap JSON overriding the packaged one"
    )
    output_dir: str = Field(
        default="runs",
        description="Default output directory for commands that write files"
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def upper_log_level(cls, v: str) -> str:
        """Accept lower-case level names."""
        return v.upper() if isinstance(v, str) else v


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
