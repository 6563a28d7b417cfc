"""
PERMUTON DOCUMENT CONTRACTS
===========================

PURPOSE: Define every persisted document: measure files, distance results,
approximation certificates and the CLI output envelope.
GUARANTEE: Rationals are normative and travel as "p/q" strings; float fields
are conveniences only.
RULE: Fields can be added as optional; existing fields keep their meaning.

VERSION: 1.0.0
"""

from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from permutons.core import CompositeMeasure, Permutation, Primitive, PrimitiveKind, Rectangle, to_rational
from permutons.metrics import DistanceMode, DistanceResult
from permutons.optimize import ApproxCertificate, ApproxMethod


def _check_rational(value: Any) -> str:
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return str(Fraction(value))
    if not isinstance(value, str):
        raise ValueError(f"expected a rational as 'p/q', got {type(value).__name__}")
    try:
        return str(to_rational(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"{value!r} is not a rational 'p/q'") from exc


class OutputFormat(Enum):
    JSON = "json"
    CSV = "csv"


class PrimitiveModel(BaseModel):
    """One primitive over a closed ``region`` [a, b, c, d]; atoms use a point region [x, x, y, y]."""

    kind: Literal["uniform_rect", "diagonal_segment", "atom"] = Field(..., description="Primitive type")
    mass: str = Field(..., description="Mass as 'p/q'")
    region: Optional[List[str]] = Field(default=None, description="Closed region [a, b, c, d]")
    point: Optional[List[str]] = Field(default=None, description="Atom location [x, y], shorthand for region")
    sign: int = Field(default=1, description="+1 main diagonal, -1 antidiagonal")

    @field_validator("mass", mode="before")
    @classmethod
    def _mass(cls, value: Any) -> str:
        return _check_rational(value)

    @field_validator("region", "point", mode="before")
    @classmethod
    def _coordinates(cls, value: Any) -> Optional[List[str]]:
        if value is None:
            return None
        return [_check_rational(v) for v in value]

    @model_validator(mode="after")
    def _shape(self) -> "PrimitiveModel":
        if self.kind == "atom" and self.point is not None:
            if len(self.point) != 2:
                raise ValueError("atom point must be [x, y]")
            x, y = self.point
            if self.region is not None and self.region != [x, x, y, y]:
                raise ValueError("atom point and region disagree")
            self.region, self.point = [x, x, y, y], None
        elif self.point is not None:
            raise ValueError(f"{self.kind} takes a region, not a point")
        if self.region is None or len(self.region) != 4:
            raise ValueError(f"{self.kind} needs region [a, b, c, d]")
        if self.kind == "atom":
            a, b, c, d = self.region
            if a != b or c != d:
                raise ValueError("atom region must be a single point [x, x, y, y]")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return self

    def to_primitive(self) -> Primitive:
        mass = Fraction(self.mass)
        a, b, c, d = (Fraction(v) for v in self.region)
        if self.kind == "atom":
            return Primitive.atom(a, c, mass)
        if self.kind == "uniform_rect":
            return Primitive.uniform(a, b, c, d, mass)
        return Primitive.diagonal(a, b, c, d, mass, self.sign)

    @classmethod
    def from_primitive(cls, p: Primitive) -> "PrimitiveModel":
        return cls(
            kind=p.kind.value,
            mass=str(p.mass),
            region=[str(v) for v in p.region.as_tuple()],
            sign=p.sign if p.kind is PrimitiveKind.DIAGONAL_SEGMENT else 1,
        )


class MeasureDocument(BaseModel):
    """Measure file contents."""

    name: str = Field(default="custom", description="Display name")
    primitives: List[PrimitiveModel] = Field(..., min_length=1, description="Mass-carrying pieces")

    def to_measure(self) -> CompositeMeasure:
        return CompositeMeasure(tuple(p.to_primitive() for p in self.primitives), name=self.name)

    @classmethod
    def from_measure(cls, mu: CompositeMeasure) -> "MeasureDocument":
        return cls(name=mu.name, primitives=[PrimitiveModel.from_primitive(p) for p in mu.primitives])


class DistanceResultModel(BaseModel):
    value: str
    witness: List[str] = Field(..., min_length=4, max_length=4)
    mode: Literal["exact", "interval"] = "exact"
    attained: bool = True
    value_float: float
    lower: Optional[str] = None
    upper: Optional[str] = None

    @field_validator("value", "lower", "upper", mode="before")
    @classmethod
    def _rational(cls, value: Any) -> Optional[str]:
        return None if value is None else _check_rational(value)

    def to_result(self) -> DistanceResult:
        mode = DistanceMode(self.mode)
        return DistanceResult(
            value=Fraction(self.value),
            witness=Rectangle(*(Fraction(v) for v in self.witness)),
            mode=mode,
            lower=Fraction(self.lower) if self.lower is not None else None,
            upper=Fraction(self.upper) if self.upper is not None else None,
            attained=self.attained,
        )


class CertificateModel(BaseModel):
    """
    Persisted ApproxCertificate.

    ``distance`` must equal the exact rectangular distance between the measure
    and the step permuton of ``permutation``; ``tools.file_utils`` and the CLI
    recheck it on load.
    """

    permutation: List[int] = Field(..., min_length=1)
    distance: str
    distance_float: float
    witness: List[str] = Field(..., min_length=4, max_length=4)
    optimal: bool
    method: ApproxMethod
    minimizers: List[List[int]] = Field(default=[])
    expansions: int = 0

    @field_validator("distance", mode="before")
    @classmethod
    def _rational(cls, value: Any) -> str:
        return _check_rational(value)

    def to_certificate(self) -> ApproxCertificate:
        return ApproxCertificate(
            permutation=Permutation(tuple(self.permutation)),
            distance=Fraction(self.distance),
            witness=Rectangle(*(Fraction(v) for v in self.witness)),
            optimal=self.optimal,
            method=self.method,
            minimizers=tuple(Permutation(tuple(m)) for m in self.minimizers),
            expansions=self.expansions,
        )


class RunConfig(BaseModel):
    """
    Everything needed to reproduce a CLI run.

    The seed is always written out, even for deterministic commands.
    """

    command: str = Field(..., description="Subcommand name")
    measure: Optional[str] = Field(default=None, description="builtin:NAME, perm:DIGITS or a file path")
    params: Dict[str, Any] = Field(default={}, description="Numeric parameters as given")
    seed: int = Field(default=0, description="Root seed")
    output: Optional[str] = Field(default=None, description="Output path, stdout when absent")
    format: OutputFormat = Field(default=OutputFormat.JSON)

    model_config = {"use_enum_values": True}


class OutputDocument(BaseModel):
    """Envelope of every JSON output: tool, version, config and result."""

    tool: str = "permuton-approx"
    version: str
    config: RunConfig
    result: Dict[str, Any]
    warnings: List[str] = Field(default=[])
