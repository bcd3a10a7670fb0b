"""Exact constructive solid geometry on axis-aligned boxes.

Space is partitioned by every box face coordinate into a slab grid; CSG
membership is constant on each cell, so volume, area and the boundary surface
follow from cell occupancy without any sampling error.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from cadeval.errors import EmptySolid, NonManifoldSolid
from cadeval.geometry import Aabb, TriangleMesh
from cadeval.triangulate import Ring, simplify_ring, trace_rings, triangulate_rings

logger = logging.getLogger(__name__)

COORDINATE_TOLERANCE = 1e-9

# In-plane (u, v) axes per normal axis, chosen so that u x v = +normal.
PLANE_AXES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


class CsgOp(str, Enum):
    """Net effect of a primitive on the solid."""

    add = "add"
    subtract = "subtract"


@dataclass(frozen=True)
class CsgBox:
    box: Aabb


@dataclass(frozen=True)
class CsgUnion:
    children: Tuple["CsgNode", ...]


@dataclass(frozen=True)
class CsgDifference:
    """First child minus the union of the remaining children."""

    children: Tuple["CsgNode", ...]


CsgNode = Union[CsgBox, CsgUnion, CsgDifference]


@dataclass(frozen=True)
class CsgPrimitive:
    box: Aabb
    op: CsgOp


@dataclass(frozen=True)
class CsgSolid:
    """Boolean tree of axis-aligned boxes."""

    root: CsgNode

    @property
    def primitives(self) -> List[CsgPrimitive]:
        """Boxes in listing order with the sign their Difference position gives."""
        out: List[CsgPrimitive] = []

        def walk(node: CsgNode, op: CsgOp) -> None:
            if isinstance(node, CsgBox):
                out.append(CsgPrimitive(node.box, op))
            elif isinstance(node, CsgUnion):
                for child in node.children:
                    walk(child, op)
            else:
                flipped = CsgOp.subtract if op == CsgOp.add else CsgOp.add
                for n, child in enumerate(node.children):
                    walk(child, op if n == 0 else flipped)

        walk(self.root, CsgOp.add)
        return out

    @property
    def boxes(self) -> List[Aabb]:
        return [p.box for p in self.primitives]


def _unique_coordinates(values: Sequence[float]) -> np.ndarray:
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    merged = [ordered[0]]
    for value in ordered[1:]:
        if value - merged[-1] > COORDINATE_TOLERANCE * max(1.0, abs(value)):
            merged.append(value)
    return np.array(merged)


def _snap(coords: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(coords - value)))


@dataclass(frozen=True)
class SlabGrid:
    """Slab coordinates per axis and the exact occupancy of the induced cells."""

    coords: Tuple[np.ndarray, np.ndarray, np.ndarray]
    occupancy: np.ndarray

    @classmethod
    def from_solid(cls, solid: CsgSolid) -> "SlabGrid":
        boxes = solid.boxes
        if not boxes:
            raise EmptySolid("Solid has no boxes")
        coords = tuple(
            _unique_coordinates([v for b in boxes for v in (b.min[a], b.max[a])])
            for a in range(3)
        )
        shape = tuple(max(len(c) - 1, 0) for c in coords)

        def occupancy(node: CsgNode) -> np.ndarray:
            if isinstance(node, CsgBox):
                cells = np.zeros(shape, dtype=bool)
                lo = [_snap(coords[a], node.box.min[a]) for a in range(3)]
                hi = [_snap(coords[a], node.box.max[a]) for a in range(3)]
                cells[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
                return cells
            if isinstance(node, CsgUnion):
                cells = np.zeros(shape, dtype=bool)
                for child in node.children:
                    cells |= occupancy(child)
                return cells
            if not node.children:
                return np.zeros(shape, dtype=bool)
            cells = occupancy(node.children[0])
            for child in node.children[1:]:
                cells &= ~occupancy(child)
            return cells

        return cls(coords=coords, occupancy=occupancy(solid.root))

    @property
    def widths(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.diff(c) for c in self.coords)

    def boundary(self, axis: int) -> np.ndarray:
        """Signed face indicator on the planes normal to ``axis``.

        Shape is the cell shape with ``axis`` extended by one: +1 where the cell
        below the plane is solid and the one above is not, -1 for the reverse.
        """
        pad = [(0, 0)] * 3
        pad[axis] = (1, 1)
        padded = np.pad(self.occupancy, pad).astype(np.int8)
        return np.diff(padded, axis=axis) * -1


def exact_volume(solid: CsgSolid) -> float:
    """Sum of occupied slab-cell volumes."""
    grid = SlabGrid.from_solid(solid)
    dx, dy, dz = grid.widths
    cells = grid.occupancy.astype(np.float64)
    return float(np.einsum("ijk,i,j,k->", cells, dx, dy, dz))


def exact_area(solid: CsgSolid) -> float:
    """Sum of cell faces separating solid from empty space."""
    grid = SlabGrid.from_solid(solid)
    widths = grid.widths
    total = 0.0
    for axis in range(3):
        u, v = PLANE_AXES[axis]
        faces = np.abs(grid.boundary(axis)).astype(np.float64)
        # move (axis, u, v) into index order for the einsum below
        faces = np.moveaxis(faces, (axis, u, v), (0, 1, 2))
        total += float(np.einsum("kij,i,j->", faces, widths[u], widths[v]))
    return total


def extract_boundary_mesh(solid: CsgSolid) -> TriangleMesh:
    """Watertight, outward-oriented boundary with coplanar faces merged.

    Faces on each plane are merged into maximal rectilinear polygons whose
    vertices are geometric corners only; corners of neighbouring polygons that
    fall on a polygon edge are inserted so that every edge is shared. Parts
    that touch only along an edge or at a point get their own copies of the
    shared vertices.

    :raises EmptySolid: if the solid encloses no volume.
    :raises NonManifoldSolid: if one face-connected part touches itself
        along an edge.
    """
    grid = SlabGrid.from_solid(solid)
    if not grid.occupancy.any():
        raise EmptySolid("Solid encloses no volume")
    components, count = ndimage.label(grid.occupancy)

    # (component, axis, plane, sign, rings in (u, v) grid indices)
    patches: List[Tuple[int, int, int, int, List[Ring]]] = []
    for axis in range(3):
        u, v = PLANE_AXES[axis]
        faces = np.moveaxis(grid.boundary(axis), (axis, u, v), (0, 1, 2))
        for plane in range(len(grid.coords[axis])):
            for sign in (1, -1):
                mask = faces[plane] == sign
                if not mask.any():
                    continue
                labels, found = ndimage.label(mask)
                for label in range(1, found + 1):
                    region = labels == label
                    # the solid cell behind any face of the patch
                    i, j = np.argwhere(region)[0]
                    cell = [0, 0, 0]
                    cell[axis] = plane - 1 if sign > 0 else plane
                    cell[u], cell[v] = int(i), int(j)
                    part = int(components[tuple(cell)])
                    rings = [simplify_ring(r) for r in trace_rings(region)]
                    patches.append((part, axis, plane, sign, rings))

    def lift(axis: int, plane: int, point: Tuple[int, int]) -> Tuple[int, int, int]:
        index = [0, 0, 0]
        u, v = PLANE_AXES[axis]
        index[axis], index[u], index[v] = plane, point[0], point[1]
        return tuple(index)

    corners = sorted(
        {
            (part, *lift(a, p, q))
            for part, a, p, _, rings in patches
            for ring in rings
            for q in ring
        }
    )
    vertex_id = {c: n for n, c in enumerate(corners)}
    on_line: Dict[Tuple[int, ...], List[int]] = {}
    for part, *corner in corners:
        for axis in range(3):
            key = tuple(-1 if a == axis else corner[a] for a in range(3))
            on_line.setdefault((part, *key), []).append(corner[axis])

    def insert_corners(part: int, axis: int, plane: int, ring: Ring) -> Ring:
        out: Ring = []
        for n, start in enumerate(ring):
            end = ring[(n + 1) % len(ring)]
            out.append(start)
            a, b = lift(axis, plane, start), lift(axis, plane, end)
            along = next(i for i in range(3) if a[i] != b[i])
            key = tuple(-1 if i == along else a[i] for i in range(3))
            lo, hi = sorted((a[along], b[along]))
            between = [t for t in on_line.get((part, *key), ()) if lo < t < hi]
            between.sort(reverse=a[along] > b[along])
            u_axis, _ = PLANE_AXES[axis]
            for t in between:
                step = list(start)
                step[0 if along == u_axis else 1] = t
                out.append(tuple(step))
        return out

    triangles: List[Tuple[int, int, int]] = []
    for part, axis, plane, sign, rings in patches:
        u, v = PLANE_AXES[axis]
        rings = [insert_corners(part, axis, plane, ring) for ring in rings]
        us, vs = grid.coords[u], grid.coords[v]
        for a, b, c in triangulate_rings(rings, lambda q: (us[q[0]], vs[q[1]])):
            ids = [vertex_id[(part, *lift(axis, plane, q))] for q in (a, b, c)]
            triangles.append(tuple(ids) if sign > 0 else tuple(ids[::-1]))

    xs, ys, zs = grid.coords
    vertices = np.array([(xs[i], ys[j], zs[k]) for _, i, j, k in corners])
    indexed = np.array(triangles, dtype=np.int64)
    edges = np.sort(indexed[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    shared, uses = np.unique(edges, axis=0, return_counts=True)
    if np.any(uses > 2):
        a, b = vertices[shared[np.argmax(uses)]]
        raise NonManifoldSolid(
            f"Solid touches itself along the edge from {a.tolist()} to {b.tolist()}"
        )
    logger.debug(
        "Boundary mesh: %d corners, %d triangles over %d patches in %d parts",
        len(vertices),
        len(triangles),
        len(patches),
        count,
    )
    return TriangleMesh(vertices, indexed)


def voxel_measures(solid: CsgSolid, resolution: float) -> Tuple[float, float]:
    """Brute-force (volume, area) from voxel-centre membership.

    Each voxel is solid when its centre is inside the CSG tree. Layers along z
    with the same per-box membership pattern share one 2D occupancy image.
    """
    boxes = solid.boxes
    if not boxes:
        raise EmptySolid("Solid has no boxes")
    lo = np.min([b.min for b in boxes], axis=0) - resolution
    hi = np.max([b.max for b in boxes], axis=0) + resolution
    counts = np.ceil((hi - lo) / resolution).astype(int)
    centres = [lo[a] + resolution * (np.arange(counts[a]) + 0.5) for a in range(3)]

    # per-axis, per-box membership of the voxel centres
    along = [
        [(centres[a] >= b.min[a]) & (centres[a] < b.max[a]) for b in boxes]
        for a in range(3)
    ]
    box_index = {id(b): n for n, b in enumerate(boxes)}

    def image(node: CsgNode, z_pattern: Tuple[bool, ...]) -> np.ndarray:
        if isinstance(node, CsgBox):
            n = box_index[id(node.box)]
            if not z_pattern[n]:
                return np.zeros((len(centres[0]), len(centres[1])), dtype=bool)
            return np.outer(along[0][n], along[1][n])
        if isinstance(node, CsgUnion):
            out = np.zeros((len(centres[0]), len(centres[1])), dtype=bool)
            for child in node.children:
                out |= image(child, z_pattern)
            return out
        if not node.children:
            return np.zeros((len(centres[0]), len(centres[1])), dtype=bool)
        out = image(node.children[0], z_pattern)
        for child in node.children[1:]:
            out &= ~image(child, z_pattern)
        return out

    patterns = [
        tuple(bool(along[2][n][k]) for n in range(len(boxes)))
        for k in range(len(centres[2]))
    ]
    # per distinct layer image: (image, solid voxel count, exposed in-plane faces)
    layers: Dict[Tuple[bool, ...], Tuple[np.ndarray, int, int]] = {}
    for pattern in patterns:
        if pattern not in layers:
            current = image(solid.root, pattern)
            padded = np.pad(current, 1)
            sides = np.count_nonzero(np.diff(padded, axis=0)) + np.count_nonzero(
                np.diff(padded, axis=1)
            )
            layers[pattern] = (current, int(current.sum()), int(sides))

    solid_voxels = 0
    exposed = 0
    previous = None
    for pattern in [*patterns, None]:
        if pattern == previous:
            continue
        below = layers[previous][0] if previous is not None else False
        above = layers[pattern][0] if pattern is not None else False
        exposed += int(np.count_nonzero(np.logical_xor(below, above)))
        previous = pattern
    for pattern in patterns:
        _, count, sides = layers[pattern]
        solid_voxels += count
        exposed += sides
    return float(solid_voxels * resolution**3), float(exposed * resolution**2)
