"""
Experiment Reporting
====================

PURPOSE:
Writes what the CLI produces: JSON output documents that embed their run
config and the library version, plot-ready CSV tables for decay and
Galton-Watson runs, and rich summary tables on stderr.

CSV FORMAT:
    method,n,distance_num,distance_den,distance_float,witness,seed
``witness`` holds "a b c d" as rationals (empty when there is none). The
numerator/denominator columns are normative; reading a report back gives
the exact rationals.
"""

import csv
import io
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from rich.console import Console
from rich.table import Table

from permutons import __version__
from permutons.contracts import OutputDocument, RunConfig
from permutons.core import Rectangle
from permutons.exceptions import MeasureFileError
from permutons.optimize import DecayRow, DecayTable
from permutons.selfsimilar import SurvivalEstimate
from tools.file_utils import dump_json, read_file, write_file

logger = logging.getLogger(__name__)

CSV_HEADER = ("method", "n", "distance_num", "distance_den", "distance_float", "witness", "seed")

console = Console(stderr=True)


@dataclass(frozen=True)
class ReportRow:
    method: str
    n: int
    distance: Fraction
    witness: Optional[Rectangle]
    seed: int

    @classmethod
    def from_decay(cls, row: DecayRow) -> "ReportRow":
        return cls(row.method, row.n, row.distance, row.witness, row.seed)

    @classmethod
    def from_survival(cls, r, estimate: SurvivalEstimate, seed: int) -> "ReportRow":
        return cls(f"gw(r={r})", estimate.generations, Fraction(estimate.survived, estimate.trials), None, seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "n": self.n,
            "distance": str(self.distance),
            "distance_float": float(self.distance),
            "witness": [str(v) for v in self.witness.as_tuple()] if self.witness is not None else None,
            "seed": self.seed,
        }

    def as_csv(self) -> List[str]:
        witness = " ".join(str(v) for v in self.witness.as_tuple()) if self.witness is not None else ""
        return [
            self.method,
            str(self.n),
            str(self.distance.numerator),
            str(self.distance.denominator),
            repr(float(self.distance)),
            witness,
            str(self.seed),
        ]


RowLike = Union[ReportRow, DecayRow]


def _as_report_row(row: RowLike) -> ReportRow:
    return row if isinstance(row, ReportRow) else ReportRow.from_decay(row)


def render_csv(rows: Iterable[RowLike]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(_as_report_row(row).as_csv())
    return buffer.getvalue()


def emit_report(rows: Iterable[RowLike], path: Optional[Union[str, Path]] = None, format: str = "csv") -> str:
    """
    Render rows as CSV (or a JSON list) and write them to ``path``.

    Returns the rendered text; with no path nothing is written.
    """
    rows = [_as_report_row(row) for row in rows]
    if format == "csv":
        text = render_csv(rows)
    elif format == "json":
        text = dump_json([row.to_dict() for row in rows])
    else:
        raise ValueError(f"unknown report format {format!r}")
    if path is not None:
        write_file(path, text)
        logger.info("wrote %d report rows to %s", len(rows), path)
    return text


def read_report(path: Union[str, Path]) -> List[ReportRow]:
    """Parse a CSV report back into exact rows."""
    reader = csv.reader(io.StringIO(read_file(path)))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise MeasureFileError("missing or unexpected CSV header", path=str(path), line=1)
    rows = []
    for line, record in enumerate(reader, start=2):
        try:
            method, n, num, den, _, witness, seed = record
            rect = Rectangle(*(Fraction(v) for v in witness.split())) if witness else None
            rows.append(ReportRow(method, int(n), Fraction(int(num), int(den)), rect, int(seed)))
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise MeasureFileError(f"malformed report row: {exc}", path=str(path), line=line) from exc
    return rows


# ============================================================================
# OUTPUT DOCUMENTS
# ============================================================================


def build_output(config: RunConfig, result: Dict[str, Any], warnings: Sequence[str] = ()) -> Dict[str, Any]:
    document = OutputDocument(version=__version__, config=config, result=result, warnings=list(warnings))
    return document.model_dump(mode="json")


def write_output(document: Dict[str, Any], path: Optional[Union[str, Path]] = None) -> str:
    """Write an output document to ``path``, or return it for stdout."""
    text = dump_json(document)
    if path is not None:
        write_file(path, text)
    return text


# ============================================================================
# CONSOLE SUMMARIES
# ============================================================================


def decay_summary(table: DecayTable) -> Table:
    summary = Table(title=f"decay: {table.measure}")
    for column in ("method", "n", "distance", "n * distance"):
        summary.add_column(column, justify="right" if column != "method" else "left")
    for row in table.rows:
        summary.add_row(row.method, str(row.n), str(row.distance), f"{row.scaled:.4f}")
    for method, fits in sorted(table.slopes.items()):
        slope = fits["log_distance_vs_log_n"]
        summary.add_row(f"{method} slope", "", "" if slope is None else f"{slope:.3f}", "")
    return summary


def survival_summary(r, estimate: SurvivalEstimate, mean: Optional[float] = None) -> Table:
    summary = Table(title=f"GW(r={r})")
    summary.add_column("quantity")
    summary.add_column("value", justify="right")
    summary.add_row("survival", f"{estimate.estimate:.4f} +- {estimate.stderr:.4f}")
    summary.add_row("trials", str(estimate.trials))
    summary.add_row("generations", str(estimate.generations))
    summary.add_row("capped", str(estimate.capped))
    if mean is not None:
        summary.add_row("E[Z(r)]", f"{mean:.6f}")
    return summary


def show(table: Table) -> None:
    console.print(table)
