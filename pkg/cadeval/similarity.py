"""Generated-vs-truth similarity metrics and their weighted aggregate."""

import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from cadeval.errors import (
    DegenerateTruthBox,
    EmptyCloud,
    ZeroTruthArea,
    ZeroTruthVolume,
)
from cadeval.geometry import (
    Aabb,
    PointCloud,
    TriangleMesh,
    bounding_box,
    corner_point_cloud,
    mesh_surface_area,
    mesh_volume,
    surface_point_cloud,
)
from cadeval.registration import (
    DEFAULT_ICP_MAX_ITER,
    DEFAULT_ICP_TOLERANCE,
    icp_alignment_score,
    icp_register,
    pca_alignment_score,
)
from cadeval.schemas import SimilarityReport, WeightFit

logger = logging.getLogger(__name__)

DimensionMode = Literal["mean", "x", "y", "z", "max"]

DEFAULT_SIMILARITY_WEIGHTS = (0.25, 0.25, 0.20, 0.15, 0.15)
# Weight indices fitted as one shared value: K1 = K2, K3, K4 = K5.
DEFAULT_WEIGHT_GROUPS = ((0, 1), (2,), (3, 4))
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def volumetric_similarity(v_gen: float, v_truth: float) -> float:
    """1 - |V_g - V_t| / V_t; negative once the error exceeds the truth volume.

    :raises ZeroTruthVolume: if the truth volume is not positive.
    """
    if v_truth <= 0:
        raise ZeroTruthVolume(f"Truth volume must be positive, got {v_truth}")
    return 1.0 - abs(v_gen - v_truth) / v_truth


def surface_similarity(a_gen: float, a_truth: float) -> float:
    """1 - |A_g - A_t| / A_t.

    :raises ZeroTruthArea: if the truth area is not positive.
    """
    if a_truth <= 0:
        raise ZeroTruthArea(f"Truth surface area must be positive, got {a_truth}")
    return 1.0 - abs(a_gen - a_truth) / a_truth


def dimensional_accuracy(
    bbox_gen: Aabb, bbox_truth: Aabb, mode: DimensionMode = "mean"
) -> float:
    """Relative bounding-box extent agreement.

    ``mean`` averages the relative deviation over the three axes; ``x``, ``y``
    and ``z`` use one axis; ``max`` uses the worst axis.

    :raises DegenerateTruthBox: if a truth extent used by ``mode`` is zero.
    """
    gen = bbox_gen.extents
    truth = bbox_truth.extents
    axes = [AXIS_INDEX[mode]] if mode in AXIS_INDEX else [0, 1, 2]
    if np.any(truth[axes] <= 0):
        raise DegenerateTruthBox(
            f"Truth bounding box has a zero extent: {truth.tolist()}"
        )
    deviations = np.abs(gen[axes] - truth[axes]) / truth[axes]
    if mode == "max":
        return 1.0 - float(deviations.max())
    if mode == "mean":
        return 1.0 - math.fsum(deviations) / 3.0
    if mode not in AXIS_INDEX:
        raise ValueError(f"Unknown dimension mode: {mode}")
    return 1.0 - float(deviations[0])


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    distances, _ = cKDTree(b).query(a)
    return float(distances.max())


def hausdorff_distance(g: PointCloud, t: PointCloud) -> float:
    """Exact symmetric Hausdorff distance between two finite point sets.

    :raises EmptyCloud: if either cloud has no points.
    """
    if len(g) == 0 or len(t) == 0:
        raise EmptyCloud("Hausdorff distance needs two non-empty point clouds")
    return max(_directed(g.points, t.points), _directed(t.points, g.points))


def final_similarity(
    volumetric: float,
    surface: float,
    dimensional: float,
    pca_alignment: float,
    icp_alignment: float,
    weights: Optional[Sequence[float]] = None,
) -> float:
    """K1 S_v + K2 S_a + K3 S_d + K4 S_p + K5 S_i."""
    weights = tuple(weights or DEFAULT_SIMILARITY_WEIGHTS)
    if len(weights) != 5:
        raise ValueError(f"Expected 5 similarity weights, got {len(weights)}")
    if not math.isclose(math.fsum(weights), 1.0, abs_tol=1e-9):
        logger.warning("Similarity weights %s do not sum to 1", weights)
    k1, k2, k3, k4, k5 = weights
    return (
        k1 * volumetric
        + k2 * surface
        + k3 * dimensional
        + k4 * pca_alignment
        + k5 * icp_alignment
    )


def fit_similarity_weights(
    components: Sequence[Sequence[float]],
    targets: Sequence[float],
    groups: Sequence[Sequence[int]] = DEFAULT_WEIGHT_GROUPS,
    source: str = "published",
) -> WeightFit:
    """Least-squares K1..K5 reproducing ``targets`` from component rows.

    Rows hold (S_v, S_a, S_d, S_p, S_i). Each group of weight indices shares
    one fitted value; the groups must cover every weight exactly once.

    :raises ValueError: on mismatched shapes, bad groups or non-finite data.
    """
    rows = np.asarray(components, dtype=np.float64)
    goals = np.asarray(targets, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 5 or len(rows) == 0:
        raise ValueError(f"Expected rows of 5 components, got shape {rows.shape}")
    if goals.shape != (len(rows),):
        raise ValueError(f"Expected {len(rows)} target scores, got {goals.size}")
    if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(goals))):
        raise ValueError("Components and targets must be finite")
    groups = [sorted(int(i) for i in group) for group in groups]
    if sorted(i for group in groups for i in group) != list(range(5)):
        raise ValueError(f"Weight groups must cover K1..K5 once, got {groups}")

    design = np.stack([rows[:, group].sum(axis=1) for group in groups], axis=1)
    solution, _, rank, _ = np.linalg.lstsq(design, goals, rcond=None)
    weights = np.zeros(5)
    for value, group in zip(solution, groups):
        weights[group] = value
    if rank < len(groups):
        logger.warning(
            "Weight fit is underdetermined: rank %d for %d free weights",
            rank,
            len(groups),
        )
    predicted = rows @ weights
    logger.debug("Fitted similarity weights %s from %d rows", weights, len(rows))
    return WeightFit(
        source=source,
        weights=tuple(float(w) for w in weights),
        groups=groups,
        rank=int(rank),
        targets=goals.tolist(),
        predicted=predicted.tolist(),
        max_residual=float(np.abs(goals - predicted).max()),
    )


def round_display(value: float, places: int = 4) -> str:
    """Fixed-point text of the exact binary value, ties to even.

    0.65625 is exactly representable and displays as ``0.6562``.
    """
    text = f"{value:.{places}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def similarity_report(
    generated: TriangleMesh,
    truth: TriangleMesh,
    weights: Optional[Sequence[float]] = None,
    dimension_mode: DimensionMode = "mean",
    point_sampling: Literal["corners", "surface"] = "corners",
    surface_samples: int = 2048,
    seed: int = 0,
    icp_max_iter: int = DEFAULT_ICP_MAX_ITER,
    icp_tol: float = DEFAULT_ICP_TOLERANCE,
    icp_precenter: bool = False,
    icp_multistart: bool = True,
) -> SimilarityReport:
    """Every similarity component of ``generated`` against ``truth``.

    Volume, area and extents are compared without any prior alignment; the
    point clouds are corner vertices unless surface sampling is requested.
    """
    weights = tuple(float(w) for w in (weights or DEFAULT_SIMILARITY_WEIGHTS))
    volumetric = volumetric_similarity(mesh_volume(generated), mesh_volume(truth))
    surface = surface_similarity(
        mesh_surface_area(generated), mesh_surface_area(truth)
    )
    truth_box = bounding_box(truth)
    dimensional = dimensional_accuracy(
        bounding_box(generated), truth_box, dimension_mode
    )

    if point_sampling == "surface":
        cloud_g = surface_point_cloud(generated, surface_samples, seed)
        cloud_t = surface_point_cloud(truth, surface_samples, seed)
    else:
        cloud_g = corner_point_cloud(generated)
        cloud_t = corner_point_cloud(truth)

    hausdorff = hausdorff_distance(cloud_g, cloud_t)
    pca = pca_alignment_score(cloud_g, cloud_t)
    icp = icp_register(
        cloud_g, cloud_t, icp_max_iter, icp_tol, icp_precenter, icp_multistart
    )
    icp_score = icp_alignment_score(icp, truth_box)

    return SimilarityReport(
        volumetric=volumetric,
        surface=surface,
        dimensional=dimensional,
        hausdorff=hausdorff,
        pca_alignment=pca,
        icp_alignment=icp_score,
        final=final_similarity(
            volumetric, surface, dimensional, pca, icp_score, weights
        ),
        weights=weights,
        dimension_mode=dimension_mode,
        icp_rmse=icp.rmse,
        icp_iterations=icp.iterations,
        icp_converged=icp.converged,
    )
