from typing import Literal, Tuple

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

from cadeval.geometry import MIN_WELD_TOLERANCE

ComplexityWeights = Tuple[float, float, float]
SimilarityWeights = Tuple[float, float, float, float, float]


class EvalConfig(BaseSettings):
    """Evaluation configuration from environment variables."""

    # Application
    app_name: str = Field(
        default="CAD Evaluation API", json_schema_extra={"env": "APP_NAME"}
    )
    app_version: str = Field(
        default="0.1.0", json_schema_extra={"env": "APP_VERSION"}
    )
    debug: bool = Field(default=False, json_schema_extra={"env": "DEBUG"})
    log_level: str = Field(default="WARNING", json_schema_extra={"env": "LOG_LEVEL"})

    # Geometry
    weld_tolerance: float = Field(
        default=1e-5, ge=0, json_schema_extra={"env": "WELD_TOLERANCE"}
    )
    point_sampling: Literal["corners", "surface"] = Field(
        default="corners", json_schema_extra={"env": "POINT_SAMPLING"}
    )
    surface_samples: int = Field(
        default=2048, ge=1, json_schema_extra={"env": "SURFACE_SAMPLES"}
    )
    sampling_seed: int = Field(default=0, json_schema_extra={"env": "SAMPLING_SEED"})

    # Metric weights (K1..K3 for complexity, K1..K5 for similarity)
    complexity_weights: ComplexityWeights = Field(
        default=(1.0, 10.0, 5.0), json_schema_extra={"env": "COMPLEXITY_WEIGHTS"}
    )
    similarity_weights: SimilarityWeights = Field(
        default=(0.25, 0.25, 0.20, 0.15, 0.15),
        json_schema_extra={"env": "SIMILARITY_WEIGHTS"},
    )
    dimension_mode: Literal["mean", "x", "y", "z", "max"] = Field(
        default="mean", json_schema_extra={"env": "DIMENSION_MODE"}
    )

    # Registration
    icp_max_iter: int = Field(
        default=50, ge=1, json_schema_extra={"env": "ICP_MAX_ITER"}
    )
    icp_tolerance: float = Field(
        default=1e-6, ge=0, json_schema_extra={"env": "ICP_TOLERANCE"}
    )
    icp_precenter: bool = Field(
        default=False, json_schema_extra={"env": "ICP_PRECENTER"}
    )
    icp_multistart: bool = Field(
        default=True, json_schema_extra={"env": "ICP_MULTISTART"}
    )

    # Server
    host: str = Field(default="0.0.0.0", json_schema_extra={"env": "HOST"})
    port: int = Field(default=8000, json_schema_extra={"env": "PORT"})

    @field_validator("weld_tolerance")
    @classmethod
    def weld_tolerance_representable(cls, value: float) -> float:
        if 0 < value < MIN_WELD_TOLERANCE:
            raise ValueError(
                f"weld_tolerance must be 0 or at least {MIN_WELD_TOLERANCE:g}"
            )
        return value

    class Config:
        env_file = ".env"
        case_sensitive = False


# Global configuration instance
config = EvalConfig()
