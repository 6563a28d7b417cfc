#!/usr/bin/env python3
"""
Test Configuration
==================

PURPOSE:
Settings defaults and environment overrides, configuration validation,
experiment presets and the logging bootstrap.

HOW TO RUN:
    pytest tests/test_config.py -v
"""

import logging

import pytest

from config.base_config import PermutonSettings, settings
from config.settings import (
    ENGINE_CONFIG,
    load_experiment_file,
    load_experiment_presets,
    setup_logging,
    validate_configuration,
)
from permutons.exceptions import MeasureFileError
from tools.file_utils import write_file


class TestSettings:
    def test_defaults(self):
        fresh = PermutonSettings(_env_file=None)
        assert fresh.max_grid_breakpoints == 8192
        assert fresh.max_rect_grid == 1024
        assert fresh.threads >= 1
        assert ENGINE_CONFIG["max_rect_grid"] == settings.max_rect_grid

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("PERMUTON_THREADS", "3")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        fresh = PermutonSettings(_env_file=None)
        assert fresh.threads == 3
        assert fresh.log_level == "DEBUG"

    def test_reports_directory_is_under_the_project(self):
        assert PermutonSettings(_env_file=None, output_dir="out").reports_directory.name == "out"


class TestValidation:
    def test_active_configuration_is_valid(self):
        ok, errors = validate_configuration()
        assert ok, errors

    def test_bad_values_are_reported(self, monkeypatch):
        monkeypatch.setattr(settings, "threads", 0)
        monkeypatch.setattr(settings, "max_rect_grid", 1)
        ok, errors = validate_configuration()
        assert not ok
        assert any("PERMUTON_THREADS" in error for error in errors)
        assert any("PERMUTON_MAX_RECT_GRID" in error for error in errors)


class TestPresets:
    def test_bundled_presets(self):
        presets = load_experiment_presets()
        assert presets["identity_quantile"]["command"] == "decay"
        assert presets["gw_default"]["r"] == "1/100"

    def test_block_must_be_a_mapping(self, tmp_path):
        path = write_file(tmp_path / "p.yaml", "good:\n  command: gw\nbad: 3\n")
        with pytest.raises(MeasureFileError) as info:
            load_experiment_presets(str(path))
        assert info.value.field == "bad"

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(MeasureFileError):
            load_experiment_file(str(write_file(tmp_path / "x.yaml", "a: [1, 2\n")))
        with pytest.raises(MeasureFileError):
            load_experiment_file(str(write_file(tmp_path / "y.yaml", "- 1\n- 2\n")))
        with pytest.raises(MeasureFileError):
            load_experiment_file(str(tmp_path / "missing.yaml"))


class TestLogging:
    def test_handlers_are_not_duplicated(self):
        setup_logging("warning")
        setup_logging("info")
        root = logging.getLogger()
        ours = [h for h in root.handlers if getattr(h, "_permuton_handler", False)]
        assert len(ours) == 1
        assert root.level == logging.INFO

    def test_log_file(self, tmp_path):
        path = tmp_path / "logs" / "run.log"
        setup_logging("INFO", str(path))
        logging.getLogger("permutons.test").info("written to file")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "written to file" in path.read_text()
        setup_logging("INFO")
