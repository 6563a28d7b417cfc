"""
Permuton Toolkit Configuration Settings
=======================================

PURPOSE:
Central configuration dictionaries for the exact engine, Monte Carlo runs,
experiments and logging, plus the logging bootstrap used by the CLI.

ADAPTATION GUIDE:
🔧 Key settings:
1. ENGINE_CONFIG: grid caps and enumeration limits
2. MONTE_CARLO_CONFIG: chunking of random draws
3. EXPERIMENT_DEFAULTS: sizes used by `decay` and `gw` when no preset is given
4. LOGGING_CONFIG: level and formats
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

from config.base_config import PROJECT_ROOT, VALID_LOG_LEVELS, settings
from permutons.exceptions import MeasureFileError

# Load environment variables
load_dotenv()

# ============================================================================
# ENGINE
# ============================================================================

ENGINE_CONFIG = {
    "max_grid_breakpoints": settings.max_grid_breakpoints,
    "max_rect_grid": settings.max_rect_grid,
    "exhaustive_limit": settings.exhaustive_limit,
    "max_fractal_size": settings.max_fractal_size,
    "search_budget": settings.search_budget,
    "threads": settings.threads,
}

MONTE_CARLO_CONFIG = {
    "chunk_size": settings.mc_chunk_size,
    "quantum_bits": 32,
    "default_samples": 100_000,
    "band_sigmas": 3.0,
}

EXPERIMENT_DEFAULTS = {
    "decay_sizes": [2, 4, 8, 16, 32, 64],
    "decay_methods": ["quantile", "hammersley_regularized", "local_search"],
    "gw_trials": 1000,
    "gw_generations": 10,
    "presets_file": str(PROJECT_ROOT / "config" / "experiments.yaml"),
}

# ============================================================================
# PATHS
# ============================================================================

REPORTS_DIR = settings.reports_directory

# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

LOGGING_CONFIG = {
    "level": settings.log_level,
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "rich_format": "%(message)s",
    "file_format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "file": settings.log_file or None,
}

# ============================================================================
# DEVELOPMENT vs PRODUCTION SETTINGS
# ============================================================================

ENVIRONMENT = settings.environment

if ENVIRONMENT == "production":
    LOGGING_CONFIG["level"] = "WARNING"
elif ENVIRONMENT == "debug":
    LOGGING_CONFIG["level"] = "DEBUG"


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """
    Install a rich handler on the root logger (stderr) and an optional
    plain-text file handler.
    """
    level_name = (level or LOGGING_CONFIG["level"]).upper()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_permuton_handler", False):
            root.removeHandler(handler)
    console = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    console.setFormatter(logging.Formatter(LOGGING_CONFIG["rich_format"]))
    console._permuton_handler = True
    root.addHandler(console)
    target = log_file or LOGGING_CONFIG["file"]
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(target, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOGGING_CONFIG["file_format"]))
        file_handler._permuton_handler = True
        root.addHandler(file_handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))


# ============================================================================
# EXPERIMENT PRESETS
# ============================================================================


def _read_yaml_mapping(path: Path) -> Dict[str, Any]:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MeasureFileError(f"cannot read YAML file: {exc}", path=str(path)) from exc
    except yaml.YAMLError as exc:
        raise MeasureFileError(f"invalid YAML: {exc}", path=str(path)) from exc
    if not isinstance(data, dict):
        raise MeasureFileError("expected a YAML mapping", path=str(path))
    return data


def load_experiment_presets(path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """Named presets: a mapping of preset name to its settings block."""
    presets_path = Path(path or EXPERIMENT_DEFAULTS["presets_file"])
    presets = _read_yaml_mapping(presets_path)
    for name, block in presets.items():
        if not isinstance(block, dict):
            raise MeasureFileError("preset must be a mapping", path=str(presets_path), field=str(name))
    return presets


def load_experiment_file(path: str) -> Dict[str, Any]:
    """A single settings block, as passed with --config."""
    return _read_yaml_mapping(Path(path))


# ============================================================================
# VALIDATION HELPERS
# ============================================================================


def validate_configuration() -> Tuple[bool, List[str]]:
    """
    Validate the active settings.

    Returns:
        tuple: (is_valid, error_messages)
    """
    errors = []

    if settings.threads < 1:
        errors.append(f"PERMUTON_THREADS must be >= 1 (got {settings.threads})")
    if settings.mc_chunk_size < 1:
        errors.append(f"PERMUTON_MC_CHUNK must be >= 1 (got {settings.mc_chunk_size})")
    if settings.max_rect_grid < 2:
        errors.append("PERMUTON_MAX_RECT_GRID must be >= 2")
    if settings.max_grid_breakpoints < 2:
        errors.append("PERMUTON_MAX_GRID must be >= 2")
    if settings.exhaustive_limit < 1:
        errors.append("PERMUTON_EXHAUSTIVE_LIMIT must be >= 1")
    if settings.log_level not in VALID_LOG_LEVELS:
        errors.append(f"unknown log level {settings.log_level!r}")
    try:
        load_experiment_presets()
    except MeasureFileError as exc:
        errors.append(f"experiment presets: {exc.message}")

    return len(errors) == 0, errors


if __name__ == "__main__":
    is_valid, errors = validate_configuration()
    if is_valid:
        print("✅ Configuration validation passed")
    else:
        print("❌ Configuration validation failed:")
        for error in errors:
            print(f"   - {error}")
