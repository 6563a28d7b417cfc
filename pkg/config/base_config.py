"""
Permuton Toolkit: Base Configuration
====================================

PURPOSE: Typed runtime settings with environment overrides.

Every field can be overridden from the process environment or a ``.env``
file in the working directory, e.g. ``PERMUTON_THREADS=4``.

ADAPTATION GUIDE:
🔧 To tune for your machine:
1. PERMUTON_THREADS for Monte Carlo and search parallelism
2. PERMUTON_MAX_RECT_GRID if you can afford larger exact sweeps
3. PERMUTON_MC_CHUNK only changes speed; results depend on it, keep it fixed
   when comparing runs
"""

from pathlib import Path

from pydantic import AliasChoices, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).parent.parent

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _env(name: str, field: str) -> AliasChoices:
    return AliasChoices(name, field)


class PermutonSettings(BaseSettings):
    """Runtime knobs for the exact engine, Monte Carlo and search."""

    project_name: str = "permuton-approx"
    version: str = "1.0.0"

    environment: str = Field(default="development", validation_alias=_env("ENVIRONMENT", "environment"))
    log_level: str = Field(default="INFO", validation_alias=_env("LOG_LEVEL", "log_level"))
    log_file: str = Field(default="", validation_alias=_env("PERMUTON_LOG_FILE", "log_file"))

    threads: int = Field(default=1, validation_alias=_env("PERMUTON_THREADS", "threads"))
    output_dir: str = Field(default="reports", validation_alias=_env("PERMUTON_OUTPUT_DIR", "output_dir"))

    # refined breakpoint closure cap, per axis
    max_grid_breakpoints: int = Field(
        default=8192, validation_alias=_env("PERMUTON_MAX_GRID", "max_grid_breakpoints")
    )
    # dense rectangle sweep cap, slots per axis
    max_rect_grid: int = Field(default=1024, validation_alias=_env("PERMUTON_MAX_RECT_GRID", "max_rect_grid"))
    exhaustive_limit: int = Field(
        default=10**7, validation_alias=_env("PERMUTON_EXHAUSTIVE_LIMIT", "exhaustive_limit")
    )
    mc_chunk_size: int = Field(default=65536, validation_alias=_env("PERMUTON_MC_CHUNK", "mc_chunk_size"))
    max_fractal_size: int = Field(
        default=10**6, validation_alias=_env("PERMUTON_MAX_FRACTAL_SIZE", "max_fractal_size")
    )
    search_budget: int = Field(default=10**6, validation_alias=_env("PERMUTON_SEARCH_BUDGET", "search_budget"))
    gw_population_cap: int = Field(
        default=10**5, validation_alias=_env("PERMUTON_GW_POPULATION_CAP", "gw_population_cap")
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()

    @property
    def project_root_path(self) -> Path:
        return PROJECT_ROOT

    @property
    def reports_directory(self) -> Path:
        path = Path(self.output_dir)
        return path if path.is_absolute() else PROJECT_ROOT / path


# Global settings instance
settings = PermutonSettings()
