from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

SCHEMA_VERSION = "1.0"

Provenance = Literal["published", "artifact"]


class ModelFormatEnum(str, Enum):
    """Supported model file formats."""

    stl = "stl"
    scad = "scad"


class ReportFormatEnum(str, Enum):
    """Output formats for reports."""

    json = "json"
    csv = "csv"
    md = "md"


# Metric schemas
class ComplexityBreakdown(BaseModel):
    """Structural complexity of one model."""

    feature: float = Field(..., ge=0, description="C_f, the triangle count.")
    surface: float = Field(..., description="C_s = A / V, per mm.")
    topological: float = Field(
        ..., description="C_t = X - 1.5 F + F with the approximated edge count."
    )
    topological_exact: int = Field(
        ..., description="X - E + F with edges counted exactly."
    )
    composite: float = Field(..., description="C = K1 C_f + K2 C_s + K3 C_t.")
    weights: Tuple[float, float, float]
    vertices: int = Field(..., ge=0)
    edges: int = Field(..., ge=0)
    faces: int = Field(..., ge=0)
    genus: float = Field(..., description="(2 - chi) / 2 from the exact counts.")
    volume: float = Field(..., description="Enclosed volume in mm^3.")
    area: float = Field(..., ge=0, description="Surface area in mm^2.")

    model_config = ConfigDict(frozen=True)


class SimilarityReport(BaseModel):
    """Generated-vs-truth similarity components and their weighted total."""

    volumetric: float
    surface: float
    dimensional: float
    hausdorff: float = Field(
        ..., ge=0, description="Symmetric Hausdorff distance, mm."
    )
    pca_alignment: float
    icp_alignment: float = Field(..., ge=0, le=1)
    final: float
    weights: Tuple[float, float, float, float, float]
    dimension_mode: Literal["mean", "x", "y", "z", "max"] = "mean"
    icp_rmse: float = Field(0.0, ge=0)
    icp_iterations: int = Field(0, ge=0)
    icp_converged: bool = True

    model_config = ConfigDict(frozen=True)


# Report schemas
class ModelInput(BaseModel):
    """One evaluated model file."""

    path: str
    format: ModelFormatEnum
    sha256: str = Field(..., min_length=64, max_length=64)


class MetricReport(BaseModel):
    """Everything computed for one model or one generated/truth pair."""

    schema_version: str = SCHEMA_VERSION
    tool_version: str
    inputs: List[ModelInput]
    generated: ComplexityBreakdown
    truth: Optional[ComplexityBreakdown] = None
    similarity: Optional[SimilarityReport] = None
    provenance: Dict[str, Provenance] = Field(default_factory=dict)
    display: Dict[str, str] = Field(
        default_factory=dict, description="Scores rounded to 4 decimals."
    )
    notes: List[str] = Field(default_factory=list)


class TrendPoint(BaseModel):
    label: str = Field(..., min_length=1)
    path: str
    similarity: SimilarityReport


class TrendSeries(BaseModel):
    """Similarity of successive generated models against one truth model."""

    truth: str
    points: List[TrendPoint] = Field(..., min_length=1)

    @model_validator(mode="after")
    def labels_unique(self) -> "TrendSeries":
        labels = [p.label for p in self.points]
        if len(set(labels)) != len(labels):
            raise ValueError(f"Trend labels must be unique, got {labels}")
        return self


class Table1Row(BaseModel):
    """One reproduced row of the case-study evaluation table."""

    modality: str
    model: str
    similarity: SimilarityReport
    expected: Dict[str, float] = Field(
        default_factory=dict, description="Published values checked for this row."
    )
    published: Dict[str, float] = Field(default_factory=dict)
    published_final: Optional[float] = Field(
        None, description="Weighted total recomputed from the published components."
    )
    mismatches: List[str] = Field(default_factory=list)


class Table1Report(BaseModel):
    schema_version: str = SCHEMA_VERSION
    tool_version: str
    rows: List[Table1Row]
    tolerance: Dict[str, float]
    notes: List[str] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return not any(row.mismatches for row in self.rows)


class WeightFit(BaseModel):
    """Similarity weights fitted by least squares to target final scores."""

    schema_version: str = SCHEMA_VERSION
    source: str = Field(..., description="'published' or the rows file used.")
    weights: Tuple[float, float, float, float, float]
    groups: List[List[int]] = Field(
        ..., description="Weight indices (0 = K1) that share one fitted value."
    )
    rank: int = Field(..., ge=0)
    targets: List[float]
    predicted: List[float]
    max_residual: float = Field(..., ge=0)
