"""
Application settings for SpecTran
Uses pydantic-settings for environment variable management
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings with environment variable support"""

    model_config = SettingsConfigDict(
        env_prefix="SPECTRAN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # ==========================================================================
    # Application Settings
    # ==========================================================================
    app_name: str = "SpecTran"
    app_version: str = "1.0.0"

    # ==========================================================================
    # Caching Configuration
    # ==========================================================================
    cache_enabled: bool = True
    cache_dir: str = "./cache"

    # ==========================================================================
    # Evaluation
    # ==========================================================================
    eval_workers: int = 4

    # ==========================================================================
    # Logging Configuration
    # ==========================================================================
    log_level: str = "INFO"
    log_file: Optional[str] = None
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    use_rich: bool = True

    @property
    def base_dir(self) -> Path:
        """Get the base directory of the project"""
        return Path(__file__).parent.parent.parent

    @property
    def cache_path(self) -> Path:
        """Get the factor cache directory"""
        path = Path(self.cache_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
