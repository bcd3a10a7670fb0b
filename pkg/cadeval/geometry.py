"""Geometric value types and exact measurements on indexed triangle meshes.

Coordinates are millimeters by convention; STL carries no unit metadata.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from cadeval.errors import EmptyMesh, InvalidMesh, NonWatertight

logger = logging.getLogger(__name__)

DEFAULT_WELD_TOLERANCE = 1e-5
# Smallest positive weld tolerance; finer grids overflow the cell hash.
MIN_WELD_TOLERANCE = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise ValueError(f"Aabb min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", _frozen(lo))
        object.__setattr__(self, "max", _frozen(hi))

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    def translated(self, offset: Sequence[float]) -> "Aabb":
        offset = np.asarray(offset, dtype=np.float64)
        return Aabb(self.min + offset, self.max + offset)


@dataclass(frozen=True)
class PointCloud:
    """Ordered list of 3D points, shape (N, 3)."""

    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("Point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(points))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh: vertices (N, 3) float64, triangles (M, 3) int64."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise InvalidMesh("Mesh contains non-finite coordinates")
        if len(triangles):
            if triangles.min() < 0 or triangles.max() >= len(vertices):
                raise InvalidMesh("Triangle index out of range")
            a, b, c = triangles.T
            if np.any((a == b) | (b == c) | (a == c)):
                raise InvalidMesh("Triangle with repeated vertex index")
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "triangles", _frozen(triangles))

    @property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0


def _cross_products(mesh: TriangleMesh) -> np.ndarray:
    c = mesh.corners
    return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])


def triangle_normals(mesh: TriangleMesh) -> np.ndarray:
    """Unit normals from right-handed winding; zero for degenerate triangles."""
    crossed = _cross_products(mesh)
    lengths = np.linalg.norm(crossed, axis=1)
    normals = np.zeros_like(crossed)
    nonzero = lengths > 0
    normals[nonzero] = crossed[nonzero] / lengths[nonzero, None]
    return normals


def _undirected_edges(triangles: np.ndarray) -> np.ndarray:
    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    return np.sort(directed, axis=1)


def is_watertight(mesh: TriangleMesh) -> bool:
    """Every edge shared by exactly two triangles with opposite orientation."""
    if mesh.is_empty:
        return False
    directed = mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    unique_directed = np.unique(directed, axis=0)
    if len(unique_directed) != len(directed):
        return False
    _, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def _require_watertight(mesh: TriangleMesh) -> None:
    if not is_watertight(mesh):
        raise NonWatertight(
            "Mesh is not watertight: some edge is not shared by exactly two "
            "consistently oriented triangles"
        )


def signed_volume(mesh: TriangleMesh) -> float:
    """Sum of signed tetrahedra spanned by each triangle and the origin."""
    c = mesh.corners
    dets = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2]))
    return float(dets.sum() / 6.0)


def mesh_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume by the divergence theorem.

    :raises NonWatertight: if the mesh does not bound a closed solid.
    """
    _require_watertight(mesh)
    return abs(signed_volume(mesh))


def mesh_surface_area(mesh: TriangleMesh) -> float:
    """Sum of triangle areas."""
    if mesh.is_empty:
        return 0.0
    return float(np.linalg.norm(_cross_products(mesh), axis=1).sum() / 2.0)


def bounding_box(shape: Union[TriangleMesh, PointCloud, np.ndarray]) -> Aabb:
    """Tight axis-aligned bounds of a mesh's vertices or of a point set."""
    if isinstance(shape, TriangleMesh):
        points = shape.vertices
    elif isinstance(shape, PointCloud):
        points = shape.points
    else:
        points = np.asarray(shape, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyMesh("Cannot bound an empty point set")
    return Aabb(points.min(axis=0), points.max(axis=0))


def weld_vertices(
    soup: Union[np.ndarray, Sequence[Sequence[Sequence[float]]]],
    tolerance: float = DEFAULT_WELD_TOLERANCE,
) -> TriangleMesh:
    """Merge triangle-soup corners closer than ``tolerance`` into shared vertices.

    Corners are hashed onto a grid of cell size ``tolerance``; a corner joins the
    first earlier vertex found within ``tolerance`` in its 27 neighbouring cells.
    Triangles that collapse after merging are dropped.
    """
    if tolerance < 0:
        raise ValueError("Weld tolerance must be non-negative")
    if 0 < tolerance < MIN_WELD_TOLERANCE:
        raise ValueError(
            f"Weld tolerance must be 0 or at least {MIN_WELD_TOLERANCE:g}, "
            f"got {tolerance:g}"
        )
    corners = np.asarray(soup, dtype=np.float64).reshape(-1, 3)

    vertices: List[Tuple[float, float, float]] = []
    index_of: Dict[Tuple[int, int, int], List[int]] = {}
    exact: Dict[Tuple[float, float, float], int] = {}
    remap = np.empty(len(corners), dtype=np.int64)
    offsets = [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)]

    for n, point in enumerate(corners):
        key = (float(point[0]), float(point[1]), float(point[2]))
        if tolerance == 0:
            if key not in exact:
                exact[key] = len(vertices)
                vertices.append(key)
            remap[n] = exact[key]
            continue

        cell = tuple(int(v) for v in np.floor(point / tolerance))
        found = -1
        for di, dj, dk in offsets:
            neighbour = (cell[0] + di, cell[1] + dj, cell[2] + dk)
            for candidate in index_of.get(neighbour, ()):
                if np.linalg.norm(point - vertices[candidate]) <= tolerance:
                    if found < 0 or candidate < found:
                        found = candidate
        if found < 0:
            found = len(vertices)
            vertices.append(key)
            index_of.setdefault(cell, []).append(found)
        remap[n] = found

    triangles = remap.reshape(-1, 3)
    if len(triangles):
        a, b, c = triangles.T
        keep = (a != b) & (b != c) & (a != c)
        dropped = int(len(triangles) - keep.sum())
        if dropped:
            logger.debug("Dropped %d degenerate triangles while welding", dropped)
        triangles = triangles[keep]

    return TriangleMesh(np.array(vertices).reshape(-1, 3), triangles)


def euler_counts(mesh: TriangleMesh) -> Tuple[int, int, int]:
    """Vertex, exact undirected edge, and face counts (X, E, F)."""
    if mesh.is_empty:
        return len(mesh.vertices), 0, 0
    edges = np.unique(_undirected_edges(mesh.triangles), axis=0)
    return len(mesh.vertices), len(edges), len(mesh.triangles)


def corner_point_cloud(mesh: TriangleMesh) -> PointCloud:
    """The welded vertex set of a mesh, first occurrence order, duplicate-free."""
    if len(mesh.vertices) == 0:
        raise EmptyMesh("Mesh has no vertices")
    _, first = np.unique(mesh.vertices, axis=0, return_index=True)
    return PointCloud(mesh.vertices[np.sort(first)])


def surface_point_cloud(mesh: TriangleMesh, count: int, seed: int = 0) -> PointCloud:
    """Area-weighted uniform samples on the mesh surface, fixed by ``seed``."""
    if mesh.is_empty:
        raise EmptyMesh("Mesh has no triangles to sample")
    areas = np.linalg.norm(_cross_products(mesh), axis=1)
    total = areas.sum()
    if total <= 0:
        raise EmptyMesh("Mesh has zero surface area")
    rng = np.random.default_rng(seed)
    faces = rng.choice(len(areas), size=count, p=areas / total)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    barycentric = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    samples = np.einsum("ij,ijk->ik", barycentric, mesh.corners[faces])
    return PointCloud(samples)


def orient_outward(mesh: TriangleMesh) -> TriangleMesh:
    """Make triangle winding consistent per connected patch, then outward.

    Orientation is propagated across manifold edges; a patch whose signed
    volume is negative is flipped as a whole.
    """
    if mesh.is_empty:
        return mesh
    triangles = np.array(mesh.triangles)
    edge_faces: Dict[Tuple[int, int], List[int]] = {}
    for f, tri in enumerate(triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_faces.setdefault((min(a, b), max(a, b)), []).append(f)

    def has_directed(face: int, a: int, b: int) -> bool:
        t = triangles[face]
        return (a, b) in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))

    patch = np.full(len(triangles), -1, dtype=np.int64)
    patches = 0
    flipped = 0
    for seed in range(len(triangles)):
        if patch[seed] >= 0:
            continue
        patch[seed] = patches
        queue = deque([seed])
        while queue:
            face = queue.popleft()
            tri = triangles[face]
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                neighbours = edge_faces[(min(a, b), max(a, b))]
                if len(neighbours) != 2:
                    continue
                other = neighbours[0] if neighbours[1] == face else neighbours[1]
                if patch[other] >= 0:
                    continue
                if has_directed(other, a, b):
                    triangles[other] = triangles[other][::-1]
                    flipped += 1
                patch[other] = patches
                queue.append(other)
        patches += 1

    corners = mesh.vertices[triangles]
    crossed = np.cross(corners[:, 1], corners[:, 2])
    dets = np.einsum("ij,ij->i", corners[:, 0], crossed)
    for p in range(patches):
        members = patch == p
        if dets[members].sum() < 0:
            triangles[members] = triangles[members][:, ::-1]
            flipped += int(members.sum())
    if flipped:
        logger.warning("Re-oriented %d triangles to outward winding", flipped)
    return TriangleMesh(mesh.vertices, triangles)


def transform_mesh(
    mesh: TriangleMesh, rotation: np.ndarray, translation: Sequence[float]
) -> TriangleMesh:
    """Apply ``x -> R x + t`` to every vertex."""
    rotation = np.asarray(rotation, dtype=np.float64)
    moved = mesh.vertices @ rotation.T + np.asarray(translation, dtype=np.float64)
    return TriangleMesh(moved, mesh.triangles)


def translate_mesh(mesh: TriangleMesh, offset: Sequence[float]) -> TriangleMesh:
    offset = np.asarray(offset, dtype=np.float64)
    return TriangleMesh(mesh.vertices + offset, mesh.triangles)


def scale_mesh(mesh: TriangleMesh, factor: float) -> TriangleMesh:
    return TriangleMesh(mesh.vertices * factor, mesh.triangles)


def subdivide_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Split each triangle into four through its edge midpoints."""
    vertices = [tuple(v) for v in mesh.vertices]
    midpoint_index: Dict[Tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoint_index:
            midpoint_index[key] = len(vertices)
            vertices.append(tuple((mesh.vertices[a] + mesh.vertices[b]) / 2.0))
        return midpoint_index[key]

    triangles = []
    for a, b, c in mesh.triangles:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        triangles.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return TriangleMesh(np.array(vertices), np.array(triangles))


def unit_cube_mesh() -> TriangleMesh:
    """Minimal outward-oriented 12-triangle cube on [0, 1]^3."""
    vertices = [
        (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
    ]
    triangles = [
        (0, 2, 1), (0, 3, 2),  # bottom
        (4, 5, 6), (4, 6, 7),  # top
        (0, 1, 5), (0, 5, 4),  # front
        (2, 3, 7), (2, 7, 6),  # back
        (1, 2, 6), (1, 6, 5),  # right
        (3, 0, 4), (3, 4, 7),  # left
    ]
    return TriangleMesh(np.array(vertices, dtype=np.float64), np.array(triangles))
