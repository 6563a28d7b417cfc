"""
File Utilities for the Permuton Toolkit
=======================================

PURPOSE:
Plain functions for every file the toolkit reads or writes: measure JSON,
permutation and point-set text files, certificates and generic JSON.
Rationals are written as "p/q" strings.

ADAPTATION GUIDE:
🔧 To add a file type:
1. Add a pydantic model in permutons/contracts.py
2. Add load_/save_ functions here that raise MeasureFileError with the
   path, line and field of anything malformed

FILE FORMATS:
- measure:     {"name": ..., "primitives": [{"kind", "mass", "region", "sign"}]}; atoms use [x, x, y, y]
- permutation: one line of one-line notation ("15342" or "1 5 3 4 2"), '#' comments
- point set:   one point per line, "x y" with rational coordinates
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from permutons.contracts import CertificateModel, MeasureDocument
from permutons.core import (
    BUILTIN_NAMES,
    CompositeMeasure,
    Permutation,
    builtin,
    parse_permutation,
    point_measure,
    step_permuton,
    to_rational,
)
from permutons.exceptions import (
    InvalidMeasureError,
    InvalidPermutationError,
    InvalidRectangleError,
    MeasureFileError,
)
from permutons.lowdisc import PointSet
from permutons.metrics import rect_distance
from permutons.optimize import ApproxCertificate

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _resolve(file_path: PathLike) -> Path:
    path = Path(file_path)
    return path if path.is_absolute() else Path.cwd() / path


def read_file(file_path: PathLike) -> str:
    """Read a UTF-8 text file; missing files raise MeasureFileError."""
    full_path = _resolve(file_path)
    if not full_path.exists():
        raise MeasureFileError("file not found", path=str(file_path))
    try:
        return full_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeasureFileError(f"cannot read file: {exc}", path=str(file_path)) from exc


def write_file(file_path: PathLike, content: str) -> Path:
    """Write text, creating parent directories."""
    full_path = _resolve(file_path)
    try:
        full_path.parent.mkdir(parents=True, exist_ok=True)
        full_path.write_text(content, encoding="utf-8")
    except OSError as exc:
        raise MeasureFileError(f"cannot write file: {exc}", path=str(file_path)) from exc
    logger.debug("wrote %s (%d bytes)", full_path, len(content))
    return full_path


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def save_json(file_path: PathLike, data: Any) -> Path:
    return write_file(file_path, dump_json(data))


def load_json(file_path: PathLike) -> Any:
    content = read_file(file_path)
    try:
        return json.loads(content)
    except json.JSONDecodeError as exc:
        raise MeasureFileError(
            f"invalid JSON: {exc.msg} (column {exc.colno})", path=str(file_path), line=exc.lineno
        ) from exc


# ============================================================================
# RATIONALS
# ============================================================================


def format_rational(value: Union[Fraction, int]) -> str:
    return str(Fraction(value))


def parse_rational(text: str) -> Fraction:
    return to_rational(text)


# ============================================================================
# MEASURES
# ============================================================================


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"])


def load_measure(file_path: PathLike) -> CompositeMeasure:
    """
    Read a measure file; schema and invariant errors name the offending field.

    Output documents of `permuton brownian --emit measure` are accepted too.
    """
    data = load_json(file_path)
    if isinstance(data, dict) and isinstance(data.get("result"), dict) and "measure" in data["result"]:
        data = data["result"]["measure"]
    try:
        document = MeasureDocument.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise MeasureFileError(first["msg"], path=str(file_path), field=_field_path(first)) from exc
    for index, primitive in enumerate(document.primitives):
        try:
            primitive.to_primitive()
        except (InvalidMeasureError, InvalidRectangleError) as exc:
            raise MeasureFileError(exc.message, path=str(file_path), field=f"primitives.{index}") from exc
    try:
        return document.to_measure()
    except InvalidMeasureError as exc:
        raise MeasureFileError(exc.message, path=str(file_path), field="primitives") from exc


def save_measure(file_path: PathLike, mu: CompositeMeasure) -> Path:
    return save_json(file_path, MeasureDocument.from_measure(mu).model_dump(exclude_none=True))


def load_measure_source(source: str) -> CompositeMeasure:
    """
    Resolve a measure argument.

    - builtin:NAME or builtin:interval_exchange:cuts=1/2;order=21;signs=++
    - perm:DIGITS  (step permuton) and points:DIGITS (point measure)
    - file:PATH or any other string is a measure file path
    """
    kind, sep, rest = source.partition(":")
    if sep and kind == "builtin":
        name, _, params = rest.partition(":")
        if name not in BUILTIN_NAMES:
            raise InvalidMeasureError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
        return builtin(name, params or None)
    if sep and kind in ("perm", "points"):
        pi = parse_permutation(rest)
        return step_permuton(pi) if kind == "perm" else point_measure(pi)
    if sep and kind == "file":
        return load_measure(rest)
    return load_measure(source)


# ============================================================================
# PERMUTATIONS AND POINT SETS
# ============================================================================


def _content_lines(text: str) -> List[tuple]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((number, line))
    return lines


def load_permutation(file_path: PathLike) -> Permutation:
    lines = _content_lines(read_file(file_path))
    if len(lines) != 1:
        raise MeasureFileError(f"expected one permutation line, found {len(lines)}", path=str(file_path))
    number, line = lines[0]
    try:
        return parse_permutation(line)
    except InvalidPermutationError as exc:
        raise MeasureFileError(exc.message, path=str(file_path), line=number) from exc


def _comment(header: Optional[str]) -> str:
    return "".join(f"# {line}\n" for line in header.splitlines()) if header else ""


def render_permutation(pi: Permutation, header: Optional[str] = None) -> str:
    return _comment(header) + " ".join(str(v) for v in pi.values) + "\n"


def save_permutation(file_path: PathLike, pi: Permutation, header: Optional[str] = None) -> Path:
    return write_file(file_path, render_permutation(pi, header))


def load_point_set(file_path: PathLike) -> PointSet:
    points = []
    for number, line in _content_lines(read_file(file_path)):
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise MeasureFileError("expected two coordinates 'x y'", path=str(file_path), line=number)
        try:
            points.append((to_rational(parts[0]), to_rational(parts[1])))
        except ValueError as exc:
            raise MeasureFileError(str(exc), path=str(file_path), line=number) from exc
    if not points:
        raise MeasureFileError("no points found", path=str(file_path))
    try:
        return PointSet(tuple(points))
    except ValueError as exc:
        raise MeasureFileError(str(exc), path=str(file_path)) from exc


def render_point_set(points: PointSet, header: Optional[str] = None) -> str:
    return _comment(header) + "".join(f"{x} {y}\n" for x, y in points)


def save_point_set(file_path: PathLike, points: PointSet, header: Optional[str] = None) -> Path:
    return write_file(file_path, render_point_set(points, header))


# ============================================================================
# CERTIFICATES
# ============================================================================


def load_certificate(file_path: PathLike, mu: CompositeMeasure = None) -> ApproxCertificate:
    """
    Read a certificate, either bare or inside an output document's ``result``.

    With ``mu`` the stored distance is recomputed and must match exactly.
    """
    data = load_json(file_path)
    if isinstance(data, dict) and "result" in data:
        data = data["result"]
    try:
        certificate = CertificateModel.model_validate(data).to_certificate()
    except ValidationError as exc:
        first = exc.errors()[0]
        raise MeasureFileError(first["msg"], path=str(file_path), field=_field_path(first)) from exc
    if mu is not None:
        recomputed = rect_distance(mu, step_permuton(certificate.permutation)).value
        if recomputed != certificate.distance:
            raise MeasureFileError(
                f"stored distance {certificate.distance} does not match recomputed {recomputed}",
                path=str(file_path),
                field="distance",
            )
    return certificate
