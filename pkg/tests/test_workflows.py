#!/usr/bin/env python3
"""
Test Workflows
==============

PURPOSE:
Exception resolution (categories and exit codes) and experiment reporting:
CSV rows with exact rationals, output documents and console summaries.

HOW TO RUN:
    pytest tests/test_workflows.py -v
"""

import json
from fractions import Fraction

import click
import pytest
from rich.table import Table

from permutons import __version__
from permutons.contracts import RunConfig
from permutons.core import Rectangle
from permutons.exceptions import (
    GrowthWindowError,
    InvalidPermutationError,
    MeasureFileError,
)
from permutons.optimize import DecayRow, DecayTable
from permutons.selfsimilar import SurvivalEstimate
from tools.file_utils import write_file
from workflows.exception_handler import EXIT_CODES, ExceptionHandler, exit_code_for
from workflows.reporting import (
    CSV_HEADER,
    ReportRow,
    build_output,
    decay_summary,
    emit_report,
    read_report,
    survival_summary,
    write_output,
)

F = Fraction


@pytest.fixture
def decay_rows():
    half = F(1, 2)
    return [
        DecayRow("quantile", 2, F(1, 4), Rectangle(0, half, 0, half), 0),
        DecayRow("quantile", 4, F(1, 8), Rectangle(F(1, 8), F(3, 8), F(1, 8), F(3, 8)), 0),
    ]


class TestExceptionHandler:
    def test_usage_errors_exit_with_one(self):
        handler = ExceptionHandler()
        resolution = handler.resolve(InvalidPermutationError("value 4 is outside 1..3", {"value": 4}))
        assert resolution.category == "usage"
        assert resolution.exit_code == EXIT_CODES["usage"] == 1
        assert resolution.details == {"value": 4}

    def test_computation_errors_exit_with_two(self):
        resolution = ExceptionHandler().resolve(GrowthWindowError("no admissible block"))
        assert resolution.exit_code == 2
        assert resolution.category == "computation"

    def test_click_and_argument_errors_are_usage(self):
        assert exit_code_for(click.UsageError("missing --n")) == 1
        assert exit_code_for(ValueError("n must be >= 1")) == 1

    def test_unexpected_errors_are_computation_failures(self):
        assert exit_code_for(RuntimeError("boom")) == 2
        assert exit_code_for(None) == 0

    def test_history_and_statistics(self):
        handler = ExceptionHandler()
        handler.resolve(MeasureFileError("bad", path="m.json", line=3))
        handler.resolve(KeyError("x"))
        stats = handler.get_exception_statistics()
        assert stats["total_exceptions"] == 2
        assert stats["by_category"] == {"usage": 1, "computation": 1}
        data = handler.exception_history[0].to_dict()
        assert data["message"] == "m.json, line 3: bad"
        assert "field" not in data["details"]


class TestReports:
    def test_csv_layout(self, decay_rows):
        text = emit_report(decay_rows)
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[1] == "quantile,2,1,4,0.25,0 1/2 0 1/2,0"
        assert lines[2] == "quantile,4,1,8,0.125,1/8 3/8 1/8 3/8,0"

    def test_written_report_reads_back_exactly(self, tmp_path, decay_rows):
        path = tmp_path / "decay.csv"
        emit_report(decay_rows, path)
        rows = read_report(path)
        assert [row.distance for row in rows] == [F(1, 4), F(1, 8)]
        assert rows[1].witness == Rectangle(F(1, 8), F(3, 8), F(1, 8), F(3, 8))

    def test_survival_rows_have_no_witness(self):
        estimate = SurvivalEstimate(estimate=0.25, stderr=0.1, trials=20, survived=5, capped=0, generations=10)
        row = ReportRow.from_survival("1/100", estimate, seed=3)
        assert row.as_csv() == ["gw(r=1/100)", "10", "1", "4", "0.25", "", "3"]
        assert row.to_dict()["witness"] is None

    def test_json_format(self, decay_rows):
        data = json.loads(emit_report(decay_rows, format="json"))
        assert data[0]["distance"] == "1/4"
        with pytest.raises(ValueError):
            emit_report(decay_rows, format="xml")

    def test_malformed_reports(self, tmp_path):
        with pytest.raises(MeasureFileError) as info:
            read_report(write_file(tmp_path / "a.csv", "n,method\n"))
        assert info.value.line == 1
        header = ",".join(CSV_HEADER)
        with pytest.raises(MeasureFileError) as info:
            read_report(write_file(tmp_path / "b.csv", f"{header}\nquantile,2,1,0,0.5,,0\n"))
        assert info.value.line == 2


class TestOutputDocuments:
    def test_document_embeds_config_and_version(self, tmp_path):
        config = RunConfig(command="dist", measure="builtin:figure1", params={"b": "perm:12348765"})
        document = build_output(config, {"value": "5/32"}, warnings=["grid fallback"])
        assert document["version"] == __version__
        assert document["tool"] == "permuton-approx"
        assert document["config"]["format"] == "json"
        assert document["config"]["seed"] == 0
        assert document["warnings"] == ["grid fallback"]
        path = tmp_path / "out.json"
        text = write_output(document, path)
        assert json.loads(path.read_text()) == json.loads(text) == document


class TestSummaries:
    def test_decay_summary(self, decay_rows):
        table = DecayTable("identity_graph", tuple(decay_rows), {"quantile": {"log_distance_vs_log_n": -1.0}})
        summary = decay_summary(table)
        assert isinstance(summary, Table)
        assert summary.row_count == 3

    def test_survival_summary(self):
        estimate = SurvivalEstimate(estimate=0.5, stderr=0.1, trials=10, survived=5, capped=0, generations=4)
        assert survival_summary("1/10", estimate, mean=1.2).row_count == 5
        assert survival_summary("1/10", estimate).row_count == 4
