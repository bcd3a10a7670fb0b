"""Structural complexity of a single model.

C_f counts faces, C_s relates surface area to volume, C_t is the Euler
characteristic with edges approximated as 1.5 F, and C combines them linearly.
"""

import logging
from typing import Optional, Sequence, Tuple

from cadeval.errors import ZeroVolume
from cadeval.geometry import (
    TriangleMesh,
    euler_counts,
    mesh_surface_area,
    mesh_volume,
)
from cadeval.schemas import ComplexityBreakdown

logger = logging.getLogger(__name__)

DEFAULT_COMPLEXITY_WEIGHTS: Tuple[float, float, float] = (1.0, 10.0, 5.0)


def feature_complexity(mesh: TriangleMesh) -> float:
    return float(len(mesh.triangles))


def surface_complexity(mesh: TriangleMesh) -> float:
    """Area to volume ratio, per mm.

    :raises ZeroVolume: when the mesh encloses no volume.
    :raises NonWatertight: when the mesh is not closed.
    """
    volume = mesh_volume(mesh)
    if volume <= 0:
        raise ZeroVolume("Surface complexity needs a positive enclosed volume")
    return mesh_surface_area(mesh) / volume


def topological_complexity(mesh: TriangleMesh) -> float:
    """X - E + F with E approximated as 1.5 F."""
    vertices, _, faces = euler_counts(mesh)
    return vertices - 1.5 * faces + faces


def euler_characteristic(mesh: TriangleMesh) -> int:
    vertices, edges, faces = euler_counts(mesh)
    return vertices - edges + faces


def composite_complexity(
    feature: float,
    surface: float,
    topological: float,
    weights: Sequence[float] = DEFAULT_COMPLEXITY_WEIGHTS,
) -> float:
    k1, k2, k3 = weights
    return k1 * feature + k2 * surface + k3 * topological


def complexity_breakdown(
    mesh: TriangleMesh, weights: Optional[Sequence[float]] = None
) -> ComplexityBreakdown:
    """All complexity components of a closed mesh, with the weights used."""
    weights = tuple(float(w) for w in (weights or DEFAULT_COMPLEXITY_WEIGHTS))
    if len(weights) != 3:
        raise ValueError(f"Expected 3 complexity weights, got {len(weights)}")

    feature = feature_complexity(mesh)
    surface = surface_complexity(mesh)
    topological = topological_complexity(mesh)
    chi = euler_characteristic(mesh)
    vertices, edges, faces = euler_counts(mesh)
    if topological != chi:
        logger.warning(
            "Approximate C_t %.1f differs from exact Euler characteristic %d",
            topological,
            chi,
        )
    return ComplexityBreakdown(
        feature=feature,
        surface=surface,
        topological=topological,
        topological_exact=chi,
        composite=composite_complexity(feature, surface, topological, weights),
        weights=weights,
        vertices=vertices,
        edges=edges,
        faces=faces,
        genus=(2 - chi) / 2,
        volume=mesh_volume(mesh),
        area=mesh_surface_area(mesh),
    )
