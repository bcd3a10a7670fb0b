import numpy as np
import pytest

from cadeval.csg import (
    CsgBox,
    CsgDifference,
    CsgSolid,
    CsgUnion,
    SlabGrid,
    exact_area,
    exact_volume,
    extract_boundary_mesh,
    voxel_measures,
)
from cadeval.errors import EmptySolid, NonManifoldSolid
from cadeval.geometry import (
    Aabb,
    euler_counts,
    is_watertight,
    mesh_surface_area,
    mesh_volume,
    signed_volume,
)
from cadeval.scad import evaluate, parse_scad

FIXTURE_MEASURES = {
    "model_a": (27000.0, 8600.0),
    "model_b": (23000.0, 8000.0),
    "model_c": (18000.0, 6400.0),
    "model_d": (18000.0, 6400.0),
}


def box(lo, hi):
    return CsgBox(Aabb(lo, hi))


def overlapping_cubes():
    return CsgSolid(CsgUnion((box([0, 0, 0], [2, 2, 2]), box([1, 1, 1], [3, 3, 3]))))


def test_exact_measures_of_fixtures(fixture_solids):
    for name, (volume, area) in FIXTURE_MEASURES.items():
        assert exact_volume(fixture_solids[name]) == pytest.approx(volume), name
        assert exact_area(fixture_solids[name]) == pytest.approx(area), name


def test_voxel_oracle_agrees_with_exact_measures(fixture_solids):
    for name, (volume, area) in FIXTURE_MEASURES.items():
        voxel_volume, voxel_area = voxel_measures(fixture_solids[name], 0.05)
        assert voxel_volume == pytest.approx(volume, rel=1e-6), name
        assert voxel_area == pytest.approx(area, rel=1e-6), name


def test_boundary_meshes_are_closed_and_exact(fixture_solids, fixture_meshes):
    for name, (volume, area) in FIXTURE_MEASURES.items():
        mesh = fixture_meshes[name]
        assert is_watertight(mesh), name
        assert signed_volume(mesh) > 0, name
        assert mesh_volume(mesh) == pytest.approx(volume, rel=1e-9), name
        assert mesh_surface_area(mesh) == pytest.approx(area, rel=1e-9), name


def test_boundary_mesh_counts_satisfy_euler_identity(fixture_meshes):
    # closed triangle meshes: F = 2 (X - chi)
    expected_chi = {"model_a": 0, "model_b": -2, "model_c": 0, "model_d": 0}
    for name, chi in expected_chi.items():
        vertices, edges, faces = euler_counts(fixture_meshes[name])
        assert vertices - edges + faces == chi, name
        assert faces == 2 * (vertices - chi), name


def test_boundary_mesh_has_no_subdivided_faces():
    mesh = extract_boundary_mesh(CsgSolid(box([0, 0, 0], [2, 3, 4])))
    assert euler_counts(mesh) == (8, 18, 12)


def test_overlapping_union():
    solid = overlapping_cubes()
    assert exact_volume(solid) == pytest.approx(15.0)
    assert exact_area(solid) == pytest.approx(42.0)
    mesh = extract_boundary_mesh(solid)
    assert is_watertight(mesh)
    assert mesh_volume(mesh) == pytest.approx(15.0)
    vertices, edges, faces = euler_counts(mesh)
    assert vertices - edges + faces == 2


def test_through_hole_has_genus_one():
    solid = CsgSolid(
        CsgDifference((box([0, 0, 0], [4, 4, 2]), box([1, 1, -1], [3, 3, 3])))
    )
    assert exact_volume(solid) == pytest.approx(24.0)
    mesh = extract_boundary_mesh(solid)
    vertices, edges, faces = euler_counts(mesh)
    assert vertices - edges + faces == 0
    assert mesh_surface_area(mesh) == pytest.approx(exact_area(solid))


def test_blind_pocket_stays_genus_zero():
    solid = CsgSolid(
        CsgDifference((box([0, 0, 0], [4, 4, 2]), box([1, 1, 1], [3, 3, 3])))
    )
    assert exact_volume(solid) == pytest.approx(28.0)
    mesh = extract_boundary_mesh(solid)
    vertices, edges, faces = euler_counts(mesh)
    assert vertices - edges + faces == 2
    assert is_watertight(mesh)


def test_difference_subtracts_union_of_tail():
    solid = CsgSolid(
        CsgDifference(
            (
                box([0, 0, 0], [3, 1, 1]),
                box([0, 0, 0], [1, 1, 1]),
                box([2, 0, 0], [3, 1, 1]),
            )
        )
    )
    assert exact_volume(solid) == pytest.approx(1.0)
    assert exact_area(solid) == pytest.approx(6.0)


def test_slab_grid_merges_near_coordinates():
    solid = CsgSolid(
        CsgUnion((box([0, 0, 0], [1, 1, 1]), box([1 + 1e-12, 0, 0], [2, 1, 1])))
    )
    grid = SlabGrid.from_solid(solid)
    assert len(grid.coords[0]) == 3
    assert grid.occupancy.all()


def test_voxel_measures_of_a_cube():
    volume, area = voxel_measures(CsgSolid(box([0, 0, 0], [1, 1, 1])), 0.25)
    assert volume == pytest.approx(1.0)
    assert area == pytest.approx(6.0)


def test_empty_results():
    unit = box([0, 0, 0], [1, 1, 1])
    same = CsgSolid(CsgDifference((unit, unit)))
    assert exact_volume(same) == 0.0
    with pytest.raises(EmptySolid):
        extract_boundary_mesh(same)
    with pytest.raises(EmptySolid):
        exact_volume(CsgSolid(CsgDifference(())))


def test_mesh_vertices_lie_on_slab_coordinates(fixture_solids, fixture_meshes):
    grid = SlabGrid.from_solid(fixture_solids["model_a"])
    vertices = fixture_meshes["model_a"].vertices
    for axis in range(3):
        assert np.isin(vertices[:, axis], grid.coords[axis]).all()


@pytest.mark.parametrize(
    "source",
    [
        "cube([1, 1, 1]); translate([1, 1, 0]) cube([1, 1, 1]);",
        "cube([1, 1, 1]); translate([1, 1, 1]) cube([1, 1, 1]);",
    ],
)
def test_parts_touching_at_an_edge_or_point_stay_watertight(source):
    solid = evaluate(parse_scad(source))
    mesh = extract_boundary_mesh(solid)
    assert is_watertight(mesh)
    assert mesh_volume(mesh) == pytest.approx(2.0)
    assert mesh_surface_area(mesh) == pytest.approx(exact_area(solid))
    # two separate closed surfaces, each with its own copy of the contact
    vertices, edges, faces = euler_counts(mesh)
    assert vertices == 16
    assert vertices - edges + faces == 4


def test_part_touching_itself_along_an_edge_is_rejected():
    solid = CsgSolid(
        CsgUnion(
            (
                box([0, 0, 0], [1, 1, 1]),
                box([1, 1, 0], [2, 2, 1]),
                box([0, 0, 1], [2, 2, 2]),
            )
        )
    )
    with pytest.raises(NonManifoldSolid, match=r"\[1\.0, 1\.0, 0\.0\]"):
        extract_boundary_mesh(solid)
