"""
Centralized runtime settings using Pydantic Settings.

Values come from ``ECHOSEG_*`` environment variables or a local ``.env`` file.
Everything has a default, so a bare checkout runs without configuration; invalid
values raise a ValidationError the first time settings are read.
"""

from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings with validation."""

    model_config = SettingsConfigDict(
        env_prefix="ECHOSEG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        protected_namespaces=(),
    )

    # Logging
    log_level: str = "INFO"
    log_timestamps: bool = True

    # Model used by `infer` when --model is not given
    model_path: Optional[str] = None

    # Execution
    jobs: int = Field(1, ge=1)
    seed: int = 0
    device: str = "cpu"


@lru_cache
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Settings are validated on first call. Subsequent calls return the cached instance.

    Returns:
        Settings: Validated settings

    Raises:
        pydantic.ValidationError: If an environment variable has an invalid value
    """
    return Settings()
