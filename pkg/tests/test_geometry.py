import numpy as np
import pytest

from cadeval.errors import EmptyMesh, InvalidMesh, NonWatertight
from cadeval.geometry import (
    Aabb,
    PointCloud,
    TriangleMesh,
    bounding_box,
    corner_point_cloud,
    euler_counts,
    is_watertight,
    mesh_surface_area,
    mesh_volume,
    orient_outward,
    scale_mesh,
    signed_volume,
    subdivide_mesh,
    surface_point_cloud,
    transform_mesh,
    translate_mesh,
    weld_vertices,
)


def rotation_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


def test_unit_cube_measures(cube):
    assert mesh_volume(cube) == pytest.approx(1.0)
    assert mesh_surface_area(cube) == pytest.approx(6.0)
    assert signed_volume(cube) > 0
    assert is_watertight(cube)


def test_cube_euler_counts(cube):
    assert euler_counts(cube) == (8, 18, 12)


def test_fixture_volumes_and_areas(fixture_meshes):
    expected = {
        "model_a": (27000.0, 8600.0),
        "model_b": (23000.0, 8000.0),
        "model_c": (18000.0, 6400.0),
        "model_d": (18000.0, 6400.0),
    }
    for name, (volume, area) in expected.items():
        mesh = fixture_meshes[name]
        assert mesh_volume(mesh) == pytest.approx(volume, rel=1e-9)
        assert mesh_surface_area(mesh) == pytest.approx(area, rel=1e-9)


def test_fixture_bounding_boxes(fixture_meshes):
    assert bounding_box(fixture_meshes["model_d"]).extents.tolist() == [30, 40, 40]
    assert bounding_box(fixture_meshes["model_a"]).extents.tolist() == [40, 40, 50]


def test_bounding_box_of_single_point():
    box = bounding_box(np.array([[1.0, 2.0, 3.0]]))
    assert box.min.tolist() == box.max.tolist() == [1.0, 2.0, 3.0]


def test_bounding_box_empty():
    with pytest.raises(EmptyMesh):
        bounding_box(np.zeros((0, 3)))


def test_bounding_box_follows_translation(fixture_meshes):
    mesh = fixture_meshes["model_a"]
    offset = [1.5, -2.0, 7.25]
    moved = bounding_box(translate_mesh(mesh, offset))
    expected = bounding_box(mesh).translated(offset)
    np.testing.assert_allclose(moved.min, expected.min)
    np.testing.assert_allclose(moved.max, expected.max)


def test_aabb_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        Aabb([1, 0, 0], [0, 1, 1])


def test_weld_cube_soup(cube):
    welded = weld_vertices(cube.corners, 1e-5)
    assert len(welded.vertices) == 8
    assert len(welded.triangles) == 12
    assert euler_counts(welded) == (8, 18, 12)


def test_weld_merges_within_tolerance():
    soup = np.array(
        [
            [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
            [[1e-7, 0, 0], [0, 1, 0], [0, 0, 1]],
        ]
    )
    mesh = weld_vertices(soup, 1e-5)
    assert len(mesh.vertices) == 4
    assert mesh.triangles[1, 0] == 0


def test_weld_keeps_distinct_points_apart():
    soup = np.array(
        [
            [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
            [[1e-3, 0, 0], [0, 1, 0], [0, 0, 1]],
        ]
    )
    assert len(weld_vertices(soup, 1e-5).vertices) == 5


def test_weld_drops_collapsed_triangles():
    soup = np.array(
        [
            [[0, 0, 0], [1e-7, 0, 0], [0, 1, 0]],
            [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
        ]
    )
    mesh = weld_vertices(soup, 1e-5)
    assert len(mesh.triangles) == 1


def test_weld_is_idempotent(fixture_meshes):
    once = weld_vertices(fixture_meshes["model_b"].corners, 1e-5)
    twice = weld_vertices(once.corners, 1e-5)
    np.testing.assert_array_equal(once.vertices, twice.vertices)
    np.testing.assert_array_equal(once.triangles, twice.triangles)


def test_closed_meshes_have_three_halves_edges(cube, fixture_meshes):
    for mesh in [cube, *fixture_meshes.values()]:
        _, edges, faces = euler_counts(mesh)
        assert 2 * edges == 3 * faces


def test_fixture_euler_characteristics(fixture_meshes):
    # model b's base cutout is enclosed on all four sides: a second handle
    expected = {"model_a": 0, "model_b": -2, "model_c": 0, "model_d": 0}
    for name, chi in expected.items():
        vertices, edges, faces = euler_counts(fixture_meshes[name])
        assert vertices - edges + faces == chi, name


def test_corner_point_cloud_of_cube(cube):
    cloud = corner_point_cloud(cube)
    assert len(cloud) == 8
    assert sorted(map(tuple, cloud.points.tolist())) == sorted(
        (x, y, z) for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)
    )


def test_corner_point_cloud_empty():
    with pytest.raises(EmptyMesh):
        corner_point_cloud(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))))


def test_open_mesh_is_not_watertight(cube):
    opened = TriangleMesh(cube.vertices, cube.triangles[:-1])
    assert not is_watertight(opened)
    with pytest.raises(NonWatertight):
        mesh_volume(opened)


def test_invalid_mesh_indices():
    with pytest.raises(InvalidMesh):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 3]]))
    with pytest.raises(InvalidMesh):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 1]]))


def test_measures_invariant_under_rigid_motion(fixture_meshes):
    mesh = fixture_meshes["model_c"]
    rotation = rotation_about([1, 2, 3], 0.7)
    moved = transform_mesh(mesh, rotation, [10.0, -4.0, 2.5])
    assert mesh_volume(moved) == pytest.approx(mesh_volume(mesh), rel=1e-9)
    area = mesh_surface_area(mesh)
    assert mesh_surface_area(moved) == pytest.approx(area, rel=1e-9)


def test_orient_outward_fixes_inverted_mesh(cube):
    inverted = TriangleMesh(cube.vertices, cube.triangles[:, ::-1])
    assert signed_volume(inverted) < 0
    fixed = orient_outward(inverted)
    assert signed_volume(fixed) == pytest.approx(1.0)
    assert is_watertight(fixed)


def test_orient_outward_fixes_single_flipped_triangle(cube):
    triangles = np.array(cube.triangles)
    triangles[3] = triangles[3][::-1]
    broken = TriangleMesh(cube.vertices, triangles)
    assert not is_watertight(broken)
    fixed = orient_outward(broken)
    assert is_watertight(fixed)
    assert mesh_volume(fixed) == pytest.approx(1.0)


def test_subdivide_quadruples_faces(cube):
    finer = subdivide_mesh(cube)
    assert len(finer.triangles) == 4 * len(cube.triangles)
    assert is_watertight(finer)
    assert mesh_volume(finer) == pytest.approx(1.0)


def test_scale_mesh(cube):
    doubled = scale_mesh(cube, 2.0)
    assert mesh_volume(doubled) == pytest.approx(8.0)
    assert mesh_surface_area(doubled) == pytest.approx(24.0)


def test_surface_point_cloud_is_deterministic(cube):
    first = surface_point_cloud(cube, 256, seed=3)
    second = surface_point_cloud(cube, 256, seed=3)
    np.testing.assert_array_equal(first.points, second.points)
    assert len(first) == 256
    assert np.all(first.points >= -1e-12) and np.all(first.points <= 1 + 1e-12)


def test_point_cloud_rejects_nan():
    with pytest.raises(ValueError):
        PointCloud(np.array([[0.0, np.nan, 0.0]]))


@pytest.mark.parametrize("tolerance", [1e-320, 1e-13])
def test_weld_rejects_tolerances_below_the_hash_limit(cube, tolerance):
    with pytest.raises(ValueError, match="at least"):
        weld_vertices(cube.corners, tolerance)


def test_weld_accepts_zero_and_the_smallest_tolerance(cube):
    assert len(weld_vertices(cube.corners, 0.0).vertices) == 8
    assert len(weld_vertices(cube.corners * 1e6, 1e-12).vertices) == 8
