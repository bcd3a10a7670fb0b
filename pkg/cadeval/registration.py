"""PCA frames and point-to-point ICP registration of point clouds."""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from cadeval.errors import DegenerateCloud, DegenerateTruthBox, EmptyCloud
from cadeval.geometry import Aabb, PointCloud

logger = logging.getLogger(__name__)

DEFAULT_ICP_MAX_ITER = 50
DEFAULT_ICP_TOLERANCE = 1e-6
# Eigenvalues below this fraction of the largest count as zero.
RANK_TOLERANCE = 1e-12
# Rotations about each coordinate axis tried as extra ICP starting poses.
START_ANGLES = (15.0, -15.0, 30.0, -30.0)


@dataclass(frozen=True)
class PcaFrame:
    """Centroid, principal axes (rows, descending spread) and eigenvalues."""

    centroid: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray
    degenerate: bool = False

    @property
    def vector(self) -> np.ndarray:
        """The three axes scaled by the square root of their eigenvalues."""
        return (self.axes * np.sqrt(self.eigenvalues)[:, None]).reshape(9)


def _orient_axis(axis: np.ndarray) -> np.ndarray:
    # the first component of largest magnitude is made positive
    k = int(np.argmax(np.abs(axis)))
    return -axis if axis[k] < 0 else axis


def pca_frame(cloud: PointCloud) -> PcaFrame:
    """Eigen-decomposition of the cloud covariance.

    Rank-deficient clouds (fewer than three independent directions) yield a
    frame flagged ``degenerate`` with their vanishing eigenvalues set to zero.

    :raises EmptyCloud: for a cloud without points.
    """
    if len(cloud) == 0:
        raise EmptyCloud("PCA needs at least one point")
    frame = _eigen_frame(cloud.points)
    if frame.degenerate:
        logger.warning(
            "Degenerate PCA frame: cloud of %d points spans %d dimensions",
            len(cloud),
            int((frame.eigenvalues > 0).sum()),
        )
    return frame


def _eigen_frame(points: np.ndarray) -> PcaFrame:
    centroid = points.mean(axis=0)
    centered = points - centroid
    covariance = centered.T @ centered / len(points)
    values, vectors = np.linalg.eigh(covariance)
    order = np.argsort(values, kind="stable")[::-1]
    values = np.clip(values[order], 0.0, None)
    axes = np.array([_orient_axis(vectors[:, k]) for k in order])

    scale = values[0] if values[0] > 0 else 1.0
    vanishing = values <= RANK_TOLERANCE * scale
    values[vanishing] = 0.0
    return PcaFrame(centroid, axes, values, bool(vanishing.any()))


def pca_alignment_score(g: PointCloud, t: PointCloud) -> float:
    """1 - |C_g - C_t| / |C_t| over the eigenvalue-scaled axis vectors.

    :raises DegenerateCloud: if either cloud does not span three dimensions.
    """
    frame_g, frame_t = pca_frame(g), pca_frame(t)
    if frame_g.degenerate or frame_t.degenerate:
        raise DegenerateCloud("PCA alignment needs clouds spanning three dimensions")
    c_g, c_t = frame_g.vector, frame_t.vector
    return 1.0 - float(np.linalg.norm(c_g - c_t) / np.linalg.norm(c_t))


@dataclass(frozen=True)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """This transform applied after ``first``."""
        return RigidTransform(
            self.rotation @ first.rotation,
            self.rotation @ first.translation + self.translation,
        )

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out


def kabsch(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rotation and translation mapping paired ``source`` rows
    onto ``target`` rows, with reflections excluded."""
    source_centroid = source.mean(axis=0)
    target_centroid = target.mean(axis=0)
    h = (source - source_centroid).T @ (target - target_centroid)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation, target_centroid - rotation @ source_centroid)


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rmse: float
    iterations: int
    converged: bool
    # RMSE before the first step, then after every iteration
    history: List[float] = field(default_factory=list)
    # starting pose of the run that produced this result
    start: str = "identity"


def _match(tree: cKDTree, points: np.ndarray) -> Tuple[np.ndarray, float]:
    """Nearest tree point per row and the RMSE of those distances.

    Of the two closest candidates, the lower index wins an exact tie.
    """
    if tree.n < 2:
        distances, nearest = tree.query(points)
    else:
        distances, indices = tree.query(points, k=2)
        tied = distances[:, 1] == distances[:, 0]
        nearest = np.where(tied, indices.min(axis=1), indices[:, 0])
        distances = distances[:, 0]
    return nearest, float(np.sqrt(np.mean(distances**2)))


def axis_rotation(axis: int, degrees: float) -> np.ndarray:
    """Right-handed rotation by ``degrees`` about coordinate axis 0, 1 or 2."""
    theta = np.radians(degrees)
    c, s = np.cos(theta), np.sin(theta)
    i, j = ((1, 2), (2, 0), (0, 1))[axis]
    rotation = np.eye(3)
    rotation[i, i], rotation[i, j] = c, -s
    rotation[j, i], rotation[j, j] = s, c
    return rotation


def _starting_poses(
    g: PointCloud, t: PointCloud, precenter: bool, multistart: bool
) -> List[Tuple[str, RigidTransform]]:
    """Identity first, then PCA-frame matches and rotations about each axis.

    Every pose after the first carries the centroid of ``g`` onto the
    centroid of ``t``.
    """
    c_g, c_t = g.points.mean(axis=0), t.points.mean(axis=0)
    if precenter:
        poses = [("identity", RigidTransform(np.eye(3), c_t - c_g))]
    else:
        poses = [("identity", RigidTransform.identity())]
    if not multistart:
        return poses

    def about_centroids(rotation: np.ndarray) -> RigidTransform:
        return RigidTransform(rotation, c_t - rotation @ c_g)

    frame_g, frame_t = _eigen_frame(g.points), _eigen_frame(t.points)
    if not (frame_g.degenerate or frame_t.degenerate):
        parity = np.linalg.det(frame_t.axes) * np.linalg.det(frame_g.axes)
        for signs in itertools.product((1.0, -1.0), repeat=3):
            if np.prod(signs) * parity < 0:
                continue
            rotation = frame_t.axes.T @ np.diag(signs) @ frame_g.axes
            label = "pca" + "".join("+" if s > 0 else "-" for s in signs)
            poses.append((label, about_centroids(rotation)))
    for axis in range(3):
        for angle in START_ANGLES:
            label = f"{'xyz'[axis]}{angle:+g}"
            poses.append((label, about_centroids(axis_rotation(axis, angle))))
    return poses


def _refine(
    source: np.ndarray,
    target: np.ndarray,
    tree: cKDTree,
    start: Tuple[str, RigidTransform],
    max_iter: int,
    tol: float,
) -> IcpResult:
    label, transform = start
    current = transform.apply(source)
    nearest, rmse = _match(tree, current)
    history = [rmse]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        step = kabsch(current, target[nearest])
        moved = step.apply(current)
        moved_nearest, moved_rmse = _match(tree, moved)
        if moved_rmse > rmse:
            history.append(rmse)
            converged = True
            break
        improvement = rmse - moved_rmse
        current, nearest, rmse = moved, moved_nearest, moved_rmse
        transform = step.compose(transform)
        history.append(rmse)
        if improvement < tol:
            converged = True
            break
    return IcpResult(transform, rmse, iterations, converged, history, label)


def icp_register(
    g: PointCloud,
    t: PointCloud,
    max_iter: int = DEFAULT_ICP_MAX_ITER,
    tol: float = DEFAULT_ICP_TOLERANCE,
    precenter: bool = False,
    multistart: bool = True,
) -> IcpResult:
    """Rigidly register ``g`` onto ``t`` by point-to-point ICP.

    Each iteration matches every point of ``g`` to its nearest point of ``t``
    and solves the best rigid motion for those pairs. Iteration stops when the
    RMSE improves by less than ``tol`` or after ``max_iter`` steps. A step
    that would raise the RMSE is discarded and ends the run.

    With ``multistart`` the run is repeated from the PCA-frame matches of
    the two clouds and from rotations about each coordinate axis; the result
    with the lowest RMSE wins, earlier starts winning within ``tol``. The
    identity start always runs first and an exact fit ends the search.

    :raises EmptyCloud: if either cloud has no points.
    """
    if len(g) == 0 or len(t) == 0:
        raise EmptyCloud("ICP needs two non-empty point clouds")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    target = t.points
    tree = cKDTree(target)

    first, *others = _starting_poses(g, t, precenter, multistart)
    best = _refine(g.points, target, tree, first, max_iter, tol)
    for start in others:
        if best.rmse <= tol:
            break
        result = _refine(g.points, target, tree, start, max_iter, tol)
        if result.rmse < best.rmse - tol:
            best = result

    if not best.converged:
        logger.warning(
            "ICP did not converge in %d iterations (rmse %.6g)", max_iter, best.rmse
        )
    logger.debug(
        "ICP finished from %s after %d iterations, rmse %.6g",
        best.start,
        best.iterations,
        best.rmse,
    )
    return best


def icp_alignment_score(result: IcpResult, truth_bbox: Aabb) -> float:
    """max(0, 1 - rmse / diagonal of the truth bounding box).

    :raises DegenerateTruthBox: if the truth box has zero diagonal.
    """
    diagonal = truth_bbox.diagonal
    if diagonal <= 0:
        raise DegenerateTruthBox("Truth bounding box has zero diagonal")
    return max(0.0, 1.0 - result.rmse / diagonal)
