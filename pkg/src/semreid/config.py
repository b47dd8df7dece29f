"""Lightweight configuration for the semreid tools."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from semreid.domain.enums import Split


class Settings(BaseSettings):
    """Environment-driven settings (prefix ``SEMREID_``)."""

    model_config = SettingsConfigDict(
        env_prefix="SEMREID_", env_file=".env", env_file_encoding="utf-8"
    )

    artifacts_dir: Path = Field(
        default=Path("artifacts"), description="Default output directory for pipeline runs"
    )
    log_level: str = Field(default="INFO", description="Root logger level used by the CLI")
    default_seed: int = Field(default=1501, ge=0, description="Seed used when --seed is omitted")
    calibration_split: Split = Field(
        default=Split.TRAIN,
        description="Split whose predictions calibrate the per-attribute thresholds",
    )
    protocol_mask: bool = Field(
        default=True,
        description="Exclude same-identity same-camera gallery items from each query",
    )
    max_workers: int = Field(
        default=1,
        ge=1,
        description="Worker threads for independent group training and query batches",
    )


@lru_cache
def get_settings() -> Settings:
    """Return a cached Settings instance."""

    return Settings()
