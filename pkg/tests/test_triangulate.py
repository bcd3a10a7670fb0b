import numpy as np
import pytest

from cadeval.triangulate import (
    TriangulationError,
    signed_area,
    simplify_ring,
    trace_rings,
    triangulate_rings,
)


def to_xy(point):
    return float(point[0]), float(point[1])


def triangle_areas(triangles):
    return [signed_area([to_xy(p) for p in tri]) for tri in triangles]


def test_square_with_hole():
    mask = np.ones((3, 3), dtype=bool)
    mask[1, 1] = False
    rings = [simplify_ring(r) for r in trace_rings(mask)]
    assert sorted(len(r) for r in rings) == [4, 4]
    areas = sorted(signed_area([to_xy(p) for p in r]) for r in rings)
    assert areas == [-1.0, 9.0]

    triangles = triangulate_rings(rings, to_xy)
    areas = triangle_areas(triangles)
    assert all(a > 0 for a in areas)
    assert sum(areas) == pytest.approx(8.0)


def test_l_shape_keeps_collinear_vertices():
    mask = np.array([[1, 1, 1], [1, 0, 0]], dtype=bool)
    (ring,) = trace_rings(mask)
    simplified = simplify_ring(ring)
    assert len(simplified) == 6
    # a T-vertex on the long edge survives triangulation
    with_extra = list(simplified)
    k = with_extra.index((0, 0))
    with_extra.insert(k + 1, (1, 0))
    triangles = triangulate_rings([with_extra], to_xy)
    assert len(triangles) == len(with_extra) - 2
    used = {p for tri in triangles for p in tri}
    assert (1, 0) in used
    assert sum(triangle_areas(triangles)) == pytest.approx(4.0)


def test_cells_touching_at_a_corner_form_separate_rings():
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    rings = trace_rings(mask)
    assert len(rings) == 2
    assert all(signed_area([to_xy(p) for p in r]) == 1.0 for r in rings)


def test_two_outer_rings_rejected():
    square = [(0, 0), (1, 0), (1, 1), (0, 1)]
    other = [(3, 0), (4, 0), (4, 1), (3, 1)]
    with pytest.raises(TriangulationError):
        triangulate_rings([square, other], to_xy)
