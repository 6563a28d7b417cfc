"""Configuration package for the permuton toolkit"""

from .base_config import PermutonSettings, settings
from .settings import (
    ENGINE_CONFIG,
    EXPERIMENT_DEFAULTS,
    LOGGING_CONFIG,
    MONTE_CARLO_CONFIG,
    setup_logging,
    validate_configuration,
)

__all__ = [
    "PermutonSettings",
    "settings",
    "ENGINE_CONFIG",
    "EXPERIMENT_DEFAULTS",
    "LOGGING_CONFIG",
    "MONTE_CARLO_CONFIG",
    "setup_logging",
    "validate_configuration",
]
