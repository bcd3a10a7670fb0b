import numpy as np
import pytest
from scipy.spatial import cKDTree

from cadeval.errors import DegenerateCloud, DegenerateTruthBox, EmptyCloud
from cadeval.geometry import Aabb, PointCloud, bounding_box, corner_point_cloud
from cadeval.registration import (
    IcpResult,
    RigidTransform,
    _match,
    axis_rotation,
    icp_alignment_score,
    icp_register,
    kabsch,
    pca_alignment_score,
    pca_frame,
)
from cadeval.similarity import hausdorff_distance


def rotation_z(degrees):
    t = np.radians(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def rotation_x(degrees):
    t = np.radians(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def box_corners(x, y, z):
    return np.array(
        [(i, j, k) for i in (0, x) for j in (0, y) for k in (0, z)], dtype=float
    )


def test_pca_frame_of_a_box():
    frame = pca_frame(PointCloud(box_corners(2, 6, 4)))
    np.testing.assert_allclose(frame.centroid, [1, 3, 2])
    np.testing.assert_allclose(frame.eigenvalues, [9, 4, 1])
    np.testing.assert_allclose(np.abs(frame.axes), [[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert not frame.degenerate
    # sign convention: the dominant component of each axis is positive
    dominant = np.argmax(np.abs(frame.axes), axis=1)
    assert np.all(frame.axes[np.arange(3), dominant] > 0)


def test_pca_frame_of_a_planar_cloud(caplog):
    frame = pca_frame(PointCloud(box_corners(2, 6, 0)))
    assert frame.degenerate
    assert frame.eigenvalues[2] == 0.0
    assert "Degenerate" in caplog.text


def test_pca_alignment_is_translation_invariant(fixture_meshes):
    cloud = corner_point_cloud(fixture_meshes["model_c"])
    moved = PointCloud(cloud.points + [50.0, -20.0, 7.0])
    assert pca_alignment_score(moved, cloud) == pytest.approx(1.0)
    assert pca_alignment_score(cloud, cloud) == 1.0


def test_pca_alignment_errors():
    flat = PointCloud(box_corners(2, 6, 0))
    solid = PointCloud(box_corners(2, 6, 4))
    with pytest.raises(DegenerateCloud):
        pca_alignment_score(flat, solid)
    with pytest.raises(EmptyCloud):
        pca_frame(PointCloud(np.zeros((0, 3))))


def test_kabsch_recovers_rigid_motion():
    rng = np.random.default_rng(7)
    source = rng.normal(size=(20, 3))
    rotation = rotation_z(30) @ rotation_x(-50)
    target = source @ rotation.T + [1.0, 2.0, -3.0]
    transform = kabsch(source, target)
    np.testing.assert_allclose(transform.rotation, rotation, atol=1e-9)
    np.testing.assert_allclose(transform.translation, [1.0, 2.0, -3.0], atol=1e-9)
    assert np.linalg.det(transform.rotation) == pytest.approx(1.0)


def test_rigid_transform_compose():
    first = RigidTransform(rotation_z(90), np.array([1.0, 0.0, 0.0]))
    second = RigidTransform(np.eye(3), np.array([0.0, 0.0, 2.0]))
    combined = second.compose(first)
    point = np.array([[1.0, 0.0, 0.0]])
    expected = second.apply(first.apply(point))
    np.testing.assert_allclose(combined.apply(point), expected)
    np.testing.assert_allclose(combined.matrix[:3, 3], [1.0, 0.0, 2.0])


def test_icp_of_identical_clouds(fixture_meshes):
    cloud = corner_point_cloud(fixture_meshes["model_b"])
    result = icp_register(cloud, cloud)
    assert result.converged
    assert result.rmse == 0.0


def test_icp_precenter_moves_centroids_together():
    cloud = PointCloud(box_corners(2, 6, 4))
    far = PointCloud(cloud.points + [100.0, 0.0, 0.0])
    result = icp_register(far, cloud, precenter=True)
    assert result.rmse < 1e-9


def test_icp_rmse_never_increases(fixture_meshes):
    g = corner_point_cloud(fixture_meshes["model_a"])
    t = corner_point_cloud(fixture_meshes["model_d"])
    history = icp_register(g, t).history
    assert all(b <= a for a, b in zip(history, history[1:]))


def test_icp_arguments():
    cloud = PointCloud(box_corners(1, 1, 1))
    with pytest.raises(EmptyCloud):
        icp_register(PointCloud(np.zeros((0, 3))), cloud)
    with pytest.raises(ValueError):
        icp_register(cloud, cloud, max_iter=0)


def test_icp_alignment_score():
    box = Aabb([0, 0, 0], [3, 4, 0])
    exact = IcpResult(RigidTransform.identity(), 0.0, 1, True)
    assert icp_alignment_score(exact, box) == 1.0
    off = IcpResult(RigidTransform.identity(), 1.0, 1, True)
    assert icp_alignment_score(off, box) == pytest.approx(0.8)
    far = IcpResult(RigidTransform.identity(), 50.0, 1, True)
    assert icp_alignment_score(far, box) == 0.0
    with pytest.raises(DegenerateTruthBox):
        icp_alignment_score(exact, Aabb([1, 1, 1], [1, 1, 1]))


def test_pca_frame_of_model_d(fixture_meshes):
    frame = pca_frame(corner_point_cloud(fixture_meshes["model_d"]))
    np.testing.assert_allclose(frame.centroid, [15.0, 120 / 7, 110 / 7])
    root = np.sqrt(4013.0)
    expected = [100 * (109 + root) / 49, 775 / 7, 100 * (109 - root) / 49]
    np.testing.assert_allclose(frame.eigenvalues, expected, rtol=1e-9)
    # the width axis is x; the other two mix y and z
    np.testing.assert_allclose(np.abs(frame.axes[1]), [1, 0, 0], atol=1e-9)
    assert not frame.degenerate


@pytest.mark.parametrize("name", ["model_a", "model_b", "model_c", "model_d"])
def test_pca_eigenvalues_survive_rotation(fixture_meshes, name):
    cloud = corner_point_cloud(fixture_meshes[name])
    rotation = rotation_z(37.0) @ rotation_x(-71.0)
    turned = PointCloud(cloud.points @ rotation.T + [4.0, -9.0, 2.5])
    np.testing.assert_allclose(
        pca_frame(turned).eigenvalues, pca_frame(cloud).eigenvalues, rtol=1e-9
    )


@pytest.mark.parametrize("name", ["model_a", "model_b", "model_c", "model_d"])
@pytest.mark.parametrize("axis", [0, 1, 2])
@pytest.mark.parametrize("angle", [10.0, 20.0, 30.0, -30.0])
def test_icp_recovers_rotations_up_to_30_degrees(fixture_meshes, name, axis, angle):
    truth = corner_point_cloud(fixture_meshes[name])
    centroid = truth.points.mean(axis=0)
    rotation = axis_rotation(axis, angle)
    moved = (truth.points - centroid) @ rotation.T + centroid + [0.3, -0.2, 0.1]
    result = icp_register(PointCloud(moved), truth)
    assert result.rmse < 1e-6
    history = result.history
    assert len(history) == result.iterations + 1
    assert all(b <= a for a, b in zip(history, history[1:]))


def test_icp_without_multistart_runs_identity_only(fixture_meshes):
    truth = corner_point_cloud(fixture_meshes["model_d"])
    centroid = truth.points.mean(axis=0)
    moved = (truth.points - centroid) @ rotation_z(2.0).T + centroid
    result = icp_register(PointCloud(moved), truth, multistart=False)
    assert result.start == "identity"
    assert result.rmse < 1e-6
    aligned = result.transform.apply(moved)
    np.testing.assert_allclose(aligned, truth.points, atol=1e-6)


def test_axis_rotation():
    quarter = [axis_rotation(axis, 90.0) for axis in range(3)]
    np.testing.assert_allclose(quarter[0] @ [0, 1, 0], [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(quarter[1] @ [0, 0, 1], [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(quarter[2] @ [1, 0, 0], [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(axis_rotation(0, -50.0), rotation_x(-50.0))


def test_match_prefers_lower_index_on_exact_ties():
    tree = cKDTree(np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]))
    nearest, rmse = _match(tree, np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    assert nearest.tolist() == [0, 1]
    assert rmse == pytest.approx(1.0)
    nearest, rmse = _match(cKDTree(np.zeros((1, 3))), np.array([[3.0, 4.0, 0.0]]))
    assert nearest.tolist() == [0]
    assert rmse == pytest.approx(5.0)


def test_icp_and_hausdorff_scale_to_large_clouds():
    # 32768 points: a dense all-pairs distance matrix would need gigabytes
    axis = np.arange(32, dtype=float)
    grid = np.array(np.meshgrid(axis, axis, axis, indexing="ij")).reshape(3, -1).T
    truth = PointCloud(grid)
    moved = PointCloud(grid + [0.01, -0.02, 0.005])
    result = icp_register(moved, truth)
    assert result.start == "identity"
    assert result.rmse < 1e-9
    assert hausdorff_distance(moved, truth) == pytest.approx(np.sqrt(0.000525))


def test_icp_of_different_shapes_keeps_a_residual(fixture_meshes):
    # the 30 distinct corners of model_c cannot all land on the 28 of model_d
    g = corner_point_cloud(fixture_meshes["model_c"])
    t = corner_point_cloud(fixture_meshes["model_d"])
    assert (len(g), len(t)) == (30, 28)
    result = icp_register(g, t)
    assert result.rmse > 0.0
    assert result.rmse <= result.history[0]
    score = icp_alignment_score(result, bounding_box(t))
    assert 0.0 < score < 1.0


def test_icp_alignment_score_stays_in_unit_interval():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        g = rng.normal(size=(int(rng.integers(3, 12)), 3)) * rng.uniform(0.1, 50)
        t = rng.normal(size=(int(rng.integers(3, 12)), 3)) * rng.uniform(0.1, 50)
        t = t + rng.uniform(-20, 20, size=3)
        result = icp_register(
            PointCloud(g), PointCloud(t), max_iter=5, multistart=False
        )
        score = icp_alignment_score(result, bounding_box(t))
        assert 0.0 <= score <= 1.0
