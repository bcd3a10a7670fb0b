import logging
from typing import Optional

from fastapi import APIRouter, Depends, File, HTTPException, Query, UploadFile

from cadeval.config import config
from cadeval.errors import CadEvalError, UnsupportedInput
from cadeval.scad import GROUND_TRUTH_FIXTURE, fixture_path
from cadeval.schemas import MetricReport, Table1Report, WeightFit
from cadeval.services import EvaluationService, LoadedModel
from cadeval.similarity import DEFAULT_WEIGHT_GROUPS
from cadeval.utils import parse_weights

logger = logging.getLogger(__name__)

router = APIRouter(tags=["evaluation"])


def get_service(
    weights_similarity: Optional[str] = Query(
        None,
        description="Comma-separated K1..K5 for the final similarity score.",
        examples=["0.25,0.25,0.2,0.15,0.15"],
    ),
    weights_complexity: Optional[str] = Query(
        None,
        description="Comma-separated K1..K3 for the composite complexity.",
        examples=["1,10,5"],
    ),
) -> EvaluationService:
    """Evaluation service with per-request weight overrides."""
    update = {}
    try:
        if weights_similarity:
            update["similarity_weights"] = parse_weights(weights_similarity, 5)
        if weights_complexity:
            update["complexity_weights"] = parse_weights(weights_complexity, 3)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    return EvaluationService(config.model_copy(update=update) if update else config)


def http_error(error: CadEvalError) -> HTTPException:
    """Map an evaluation error onto an HTTP error response."""
    status_code = 415 if isinstance(error, UnsupportedInput) else 400
    logger.warning("Rejected input (%s): %s", type(error).__name__, error)
    return HTTPException(status_code=status_code, detail=str(error))


async def _load(service: EvaluationService, upload: UploadFile) -> LoadedModel:
    data = await upload.read()
    try:
        return service.models.load_bytes(data, upload.filename or "upload")
    except CadEvalError as e:
        raise http_error(e) from e


@router.post("/complexity", response_model=MetricReport)
async def evaluate_complexity(
    model: UploadFile = File(..., description="Model file (.stl or .scad)."),
    service: EvaluationService = Depends(get_service),
):
    """Structural complexity of an uploaded model."""
    loaded = await _load(service, model)
    try:
        return service.complexity_of(loaded)
    except CadEvalError as e:
        raise http_error(e) from e


@router.post("/compare", response_model=MetricReport)
async def compare_models(
    generated: UploadFile = File(..., description="Generated model."),
    truth: Optional[UploadFile] = File(
        None, description="Ground-truth model; the bundled one when omitted."
    ),
    service: EvaluationService = Depends(get_service),
):
    """Similarity of an uploaded model against a ground truth."""
    generated_model = await _load(service, generated)
    try:
        if truth is not None:
            truth_model = await _load(service, truth)
        else:
            truth_model = service.models.load(fixture_path(GROUND_TRUTH_FIXTURE))
        return service.compare_models(generated_model, truth_model)
    except CadEvalError as e:
        raise http_error(e) from e


@router.get("/table1", response_model=Table1Report)
async def reproduce_table1(service: EvaluationService = Depends(get_service)):
    """Re-evaluate the bundled models against the published table."""
    report = service.repro_table1()
    if not report.passed:
        logger.warning("Table reproduction has mismatches")
    return report


@router.get("/weights/fit", response_model=WeightFit)
async def fit_weights(
    free: bool = Query(False, description="Fit all five weights independently."),
    service: EvaluationService = Depends(get_service),
):
    """Similarity weights fitted to the published final scores."""
    groups = [[k] for k in range(5)] if free else DEFAULT_WEIGHT_GROUPS
    try:
        return service.fit_weights(groups=groups)
    except CadEvalError as e:
        raise http_error(e) from e
