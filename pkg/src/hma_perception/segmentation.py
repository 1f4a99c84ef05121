"""Tabletop object extraction from an organized RGB-D cloud.

The flow is: pass-through crop, RANSAC table plane, points above the table,
Euclidean clustering, per-cluster candidate (centroid, ROI, crop), optional
classification, and conversion of each centroid into a robot-frame grasp target.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .cloud import OrganizedCloud
from .errors import (DegenerateInput, EmptyCluster, InvalidLimits, NoConsensus,
                     PerceptionError, StageError)
from .geometry import CameraIntrinsics, PlaneModel, RigidTransform, transform_direction, transform_point
from .rng import Xoshiro256StarStar

log = logging.getLogger(__name__)

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class PassThroughLimits:
    axis: str
    min: float
    max: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidLimits(f"unknown axis {self.axis!r}")


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 500
    inlier_threshold: float = 0.008
    min_inlier_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.iterations <= 0 or self.inlier_threshold <= 0:
            raise ValueError("iterations and inlier_threshold must be positive")
        if not 0 < self.min_inlier_fraction <= 1:
            raise ValueError("min_inlier_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class ClusterParams:
    tolerance: float = 0.02
    min_points: int = 30
    max_points: int = 50000

    def __post_init__(self):
        if self.tolerance <= 0 or not 0 < self.min_points <= self.max_points:
            raise ValueError("invalid cluster parameters")


@dataclass(eq=False)
class ObjectCandidate:
    point_indices: np.ndarray
    centroid_camera: np.ndarray
    roi: Tuple[int, int, int, int]  # inclusive (u_min, v_min, u_max, v_max)
    crop: np.ndarray  # (h, w, 3) uint8
    label: Optional[int] = None
    score: Optional[float] = None


@dataclass(frozen=True, eq=False)
class GraspTarget:
    position_robot: np.ndarray
    approach_axis: np.ndarray


@dataclass(frozen=True)
class PipelineConfig:
    pass_through: Sequence[PassThroughLimits] = (PassThroughLimits("z", 0.3, 1.5),)
    ransac: RansacParams = RansacParams()
    min_height: float = 0.01
    max_height: float = 0.40
    cluster: ClusterParams = ClusterParams()
    roi_padding: int = 5
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default)
    camera_to_robot: RigidTransform = field(default_factory=RigidTransform.identity)


@dataclass
class PipelineResult:
    plane: PlaneModel
    plane_inliers: np.ndarray
    candidates: List[ObjectCandidate]
    targets: List[GraspTarget]


def pass_through(cloud, limits):
    """Invalidate points whose coordinate along any limit's axis falls outside ``[min, max]``."""
    valid = cloud.valid.copy()
    for lim in limits:
        if not lim.min < lim.max:
            raise InvalidLimits(f"{lim.axis}: min {lim.min} >= max {lim.max}")
    for lim in limits:
        c = cloud.points[:, AXES[lim.axis]]
        with np.errstate(invalid="ignore"):
            valid &= (c >= lim.min) & (c <= lim.max)
    return cloud.with_valid(valid)


def _plane_through(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    s = np.linalg.norm(n)
    if s < 1e-12:
        return None
    n = n / s
    return n, -float(n @ p0)


def _fit_plane_lsq(pts):
    centroid = pts.mean(axis=0)
    q = pts - centroid
    cov = q.T @ q
    _, vecs = np.linalg.eigh(cov)
    return PlaneModel.from_point_normal(centroid, vecs[:, 0])


CHUNK = 16384


def _count_inliers(x, y, z, n, d, thr, buf, tmp, beat):
    """Inliers of plane ``(n, d)``, or -1 once the count provably cannot exceed ``beat``.

    Points are scored chunk by chunk; a hypothesis is dropped as soon as even
    an all-inlier remainder would leave it at or below ``beat``. The returned
    count is exact whenever it is not -1.
    """
    total = x.size
    count = 0
    for s in range(0, total, CHUNK):
        e = min(s + CHUNK, total)
        b, t = buf[:e - s], tmp[:e - s]
        np.multiply(x[s:e], n[0], out=b)
        np.multiply(y[s:e], n[1], out=t)
        b += t
        np.multiply(z[s:e], n[2], out=t)
        b += t
        b += d
        np.abs(b, out=b)
        count += int(np.count_nonzero(b <= thr))
        if count + (total - e) <= beat:
            return -1
    return count


def ransac_plane(cloud, params):
    """Dominant plane among the valid points, with its inlier indices.

    Hypotheses come from three distinct valid points drawn with
    :class:`~hma_perception.rng.Xoshiro256StarStar`; the hypothesis with the
    most inliers (earliest on ties) is refined by a least-squares fit over its
    inliers, and the inlier set is recomputed against the refined plane.
    """
    idx = cloud.valid_indices()
    n = idx.size
    if n < 3:
        raise DegenerateInput(f"need at least 3 valid points, have {n}")
    pts = cloud.points[idx]
    q = pts - pts.mean(axis=0)
    ev = np.linalg.eigvalsh(q.T @ q)
    if ev[1] <= 1e-12 * max(ev[2], 1e-300):
        raise DegenerateInput("valid points are collinear")

    x, y, z = (np.ascontiguousarray(pts[:, i]) for i in range(3))
    buf = np.empty(min(n, CHUNK))
    tmp = np.empty_like(buf)
    rng = Xoshiro256StarStar(params.seed)
    thr = params.inlier_threshold
    best_count, best = -1, None
    for _ in range(params.iterations):
        i, j, k = rng.sample(n, 3)
        hyp = _plane_through(pts[i], pts[j], pts[k])
        if hyp is None:
            continue
        count = _count_inliers(x, y, z, hyp[0], hyp[1], thr, buf, tmp, best_count)
        if count > best_count:
            best_count, best = count, hyp
    if best is None:
        raise DegenerateInput("every RANSAC sample was collinear")
    if best_count / n < params.min_inlier_fraction:
        raise NoConsensus(f"best plane has {best_count}/{n} inliers "
                          f"(< {params.min_inlier_fraction:.3f})")

    coarse = np.abs(signed_distance_elementwise(PlaneModel.from_normal_offset(*best), x, y, z)) <= thr
    plane = _fit_plane_lsq(pts[coarse])
    inliers = np.abs(signed_distance_elementwise(plane, x, y, z)) <= thr
    log.debug("ransac: %d/%d inliers after refinement", int(inliers.sum()), n)
    return plane, idx[inliers]


def signed_distance_elementwise(plane, x, y, z):
    n = plane.normal
    return x * n[0] + y * n[1] + z * n[2] + plane.offset


def extract_above_plane(cloud, plane, min_height, max_height):
    """Indices of valid points whose signed height above ``plane`` lies in ``[min_height, max_height]``."""
    if not 0 <= min_height < max_height:
        raise ValueError("need 0 <= min_height < max_height")
    idx = cloud.valid_indices()
    p = cloud.points[idx]
    h = signed_distance_elementwise(plane, p[:, 0], p[:, 1], p[:, 2])
    return idx[(h >= min_height) & (h <= max_height)]


def within_tolerance(a, b, tolerance):
    """Single-linkage predicate: squared Euclidean distance against squared tolerance."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    return dx * dx + dy * dy + dz * dz <= tolerance * tolerance


def euclidean_cluster(cloud, candidates, params):
    """Connected components of the graph linking candidates within ``params.tolerance``.

    Components outside ``[min_points, max_points]`` are dropped. Result is
    sorted by decreasing size, ties broken by smallest member index; each
    component is a sorted index array into ``cloud``.
    """
    cand = np.unique(np.asarray(candidates, dtype=np.int64))
    m = cand.size
    if m == 0:
        return []
    pts = cloud.points[cand]
    tree = cKDTree(pts)
    # kd-tree proposes pairs with a little slack; the exact predicate decides
    pairs = tree.query_pairs(params.tolerance * (1 + 1e-9) + 1e-15, output_type="ndarray")
    if pairs.size:
        keep = within_tolerance(pts[pairs[:, 0]], pts[pairs[:, 1]], params.tolerance)
        pairs = pairs[keep]
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)

    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    clusters = [cand[g] for g in np.split(order, bounds)]
    clusters = [c for c in clusters if params.min_points <= c.size <= params.max_points]
    clusters.sort(key=lambda c: (-c.size, int(c[0])))
    return clusters


def make_candidate(cloud, cluster, k, roi_padding):
    """Centroid, padded pixel bounding box and RGB crop for one cluster."""
    cluster = np.unique(np.asarray(cluster, dtype=np.int64))
    if cluster.size == 0:
        raise EmptyCluster("cluster has no points")
    if (k.width, k.height) != (cloud.width, cloud.height):
        raise ValueError("intrinsics do not match cloud dimensions")
    if not np.all(cloud.valid[cluster]):
        raise ValueError("cluster references invalid points")
    centroid = cloud.points[cluster].mean(axis=0)
    u = cluster % cloud.width
    v = cluster // cloud.width
    pad = int(roi_padding)
    roi = (
        max(int(u.min()) - pad, 0),
        max(int(v.min()) - pad, 0),
        min(int(u.max()) + pad, cloud.width - 1),
        min(int(v.max()) + pad, cloud.height - 1),
    )
    crop = cloud.image[roi[1]:roi[3] + 1, roi[0]:roi[2] + 1].copy()
    return ObjectCandidate(cluster, centroid, roi, crop)


def to_robot_frame(candidate, camera_to_robot, plane=None):
    """Grasp target: robot-frame centroid plus a top-down approach axis.

    The approach axis is the table normal (``plane``, camera frame) rotated
    into the robot frame and flipped to point up (+z). Without a plane the
    robot +z axis is used.
    """
    position = transform_point(camera_to_robot, candidate.centroid_camera)
    if plane is None:
        axis = np.array([0.0, 0.0, 1.0])
    else:
        axis = transform_direction(camera_to_robot, plane.normal)
        axis = axis / np.linalg.norm(axis)
        if axis[2] < 0:
            axis = -axis
    return GraspTarget(position, axis)


def run_pipeline(cloud, config, classifier=None):
    """Run every extraction stage in order; failures surface as :class:`StageError`."""
    from .classifier import preprocess

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except PerceptionError as e:
            raise StageError(name, e) from e

    cropped = stage("pass_through", pass_through, cloud, config.pass_through)
    plane, inliers = stage("ransac_plane", ransac_plane, cropped, config.ransac)
    above = stage("extract_above_plane", extract_above_plane, cropped, plane,
                  config.min_height, config.max_height)
    clusters = stage("euclidean_cluster", euclidean_cluster, cropped, above, config.cluster)
    candidates, targets = [], []
    for c in clusters:
        cand = stage("make_candidate", make_candidate, cropped, c, config.intrinsics, config.roi_padding)
        if classifier is not None:
            cand.label, cand.score = stage("classify", classifier.classify, preprocess(cand.crop))
        candidates.append(cand)
        targets.append(stage("to_robot_frame", to_robot_frame, cand, config.camera_to_robot, plane))
    log.info("pipeline: %d table inliers, %d candidates", inliers.size, len(candidates))
    return PipelineResult(plane, inliers, candidates, targets)
