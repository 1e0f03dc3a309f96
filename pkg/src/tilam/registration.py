"""Scan alignment: voxel reduction, nearest neighbors, rigid fit, ICP.

Matching runs on the non-terrain points only; flat ground constrains an
alignment poorly while trunks and other structure lock it down. Clouds are
voxel-reduced before the tree build, correspondences are gated by distance
and the transform re-estimated in closed form from the gated pairs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateConfiguration, NoCorrespondences
from .geometry import RigidTransform, apply_transform
from .scan import FRAME_WORLD, LabeledCloud, PointCloud


class KdTree:
    """Exact nearest-neighbor index over an (N, 3) point set."""

    def __init__(self, points: np.ndarray, leaf_size: int = 16):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValueError("empty point set")
        self._tree = cKDTree(self.points, leafsize=leaf_size)

    def query(self, q: np.ndarray) -> tuple[int, float]:
        d, i = self._tree.query(np.asarray(q, dtype=float).reshape(3))
        return int(i), float(d)

    def query_batch(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d, i = self._tree.query(np.asarray(q, dtype=float).reshape(-1, 3))
        return i.astype(int), d


def nearest_neighbor(tree: KdTree, query: np.ndarray) -> tuple[int, float]:
    """Index and distance of the exact nearest point."""
    return tree.query(query)


@dataclass
class IcpConfig:
    max_iterations: int = 50
    convergence_eps: float = 1e-5
    max_correspondence_dist: float = 1.0
    voxel_size: float = 0.10


@dataclass
class IcpResult:
    transform: RigidTransform
    final_mse: float
    iterations: int
    converged: bool
    elapsed: float
    mse_history: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _voxel_keys(points: np.ndarray, voxel: float) -> np.ndarray:
    cells = np.floor(points / voxel).astype(np.int64)
    cells -= cells.min(axis=0)
    dims = cells.max(axis=0) + 1
    return (cells[:, 0] * dims[1] + cells[:, 1]) * dims[2] + cells[:, 2]


def _reduce_array(points: np.ndarray, voxel: float) -> np.ndarray:
    if len(points) == 0:
        return points.copy()
    keys = _voxel_keys(points, voxel)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    pts = points[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(keys)) + 1])
    counts = np.diff(np.concatenate([starts, [len(pts)]]))
    sums = np.add.reduceat(pts, starts, axis=0)
    return sums / counts[:, None]


def reduce_points(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace each occupied voxel by the centroid of its points.

    Output order follows the voxel grid scan order, which is deterministic
    for a given input.
    """
    if voxel_size <= 0:
        raise ValueError("voxel size must be positive")
    return PointCloud(_reduce_array(cloud.points, voxel_size), cloud.frame)


def estimate_rigid_transform(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rigid motion mapping source points onto target points.

    Closed form via the SVD of the cross-covariance; a reflection in the
    solution is repaired by negating the last singular direction. Raises
    DegenerateConfiguration for fewer than 3 pairs or collinear geometry.
    """
    src = np.asarray(source, dtype=float).reshape(-1, 3)
    dst = np.asarray(target, dtype=float).reshape(-1, 3)
    if len(src) != len(dst):
        raise ValueError("pair counts differ")
    if len(src) < 3:
        raise DegenerateConfiguration("need at least 3 pairs")
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    h = (src - sc).T @ (dst - dc)
    u, sig, vt = np.linalg.svd(h)
    if sig[1] <= max(sig[0], 1.0) * 1e-12:
        raise DegenerateConfiguration("points are collinear or coincident")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, dc - rot @ sc)


def icp_align(source: PointCloud, target: PointCloud,
              initial_guess: RigidTransform, config: IcpConfig) -> IcpResult:
    """Iterative closest point from source onto target.

    Both clouds are voxel-reduced first. Each sweep matches transformed
    source points to their nearest target point, keeps pairs within the
    correspondence gate and refits the absolute transform. Iteration stops
    on a relative MSE change below convergence_eps; a sweep that would
    raise the MSE is rejected, so the accepted MSE sequence never increases.
    """
    t0 = time.perf_counter()
    src = _reduce_array(source.points, config.voxel_size)
    dst = _reduce_array(target.points, config.voxel_size)
    if len(src) == 0 or len(dst) == 0:
        raise NoCorrespondences("empty cloud after reduction")
    tree = cKDTree(dst, leafsize=16)

    transform = initial_guess
    previous = initial_guess
    prev_mse = np.inf
    history = []
    converged = False
    iterations = 0
    for _ in range(config.max_iterations):
        moved = apply_transform(transform, src)
        dist, idx = tree.query(moved)
        mask = dist <= config.max_correspondence_dist
        if not np.any(mask):
            raise NoCorrespondences("correspondence gate rejected every pair")
        mse = float(np.mean(dist[mask] ** 2))
        if mse > prev_mse:
            # a sweep that worsened the fit is rejected outright
            transform = previous
            converged = True
            break
        iterations += 1
        history.append(mse)
        rel = abs(prev_mse - mse) / max(prev_mse, 1e-30) if np.isfinite(prev_mse) else np.inf
        previous = transform
        transform = estimate_rigid_transform(src[mask], dst[idx[mask]])
        prev_mse = mse
        if rel < config.convergence_eps:
            converged = True
            break
    final_mse = history[-1] if history else float("nan")
    return IcpResult(transform, final_mse, iterations, converged,
                     time.perf_counter() - t0, np.asarray(history))


def merge_maps(global_map: LabeledCloud, new_scan: LabeledCloud,
               alignment: RigidTransform, voxel_size: float = 0.10) -> LabeledCloud:
    """Fold an aligned scan into the global map.

    The new scan is moved by the alignment, concatenated and deduplicated on
    a half-voxel grid. Terrain and non-terrain points are deduplicated
    separately so labels survive the merge.
    """
    moved = apply_transform(alignment, new_scan.cloud.points)
    pts = np.vstack([global_map.cloud.points, moved])
    labels = np.concatenate([global_map.labels, new_scan.labels])
    voxel = voxel_size / 2.0
    out_pts = []
    out_labels = []
    for label in np.unique(labels):
        part = _reduce_array(pts[labels == label], voxel)
        out_pts.append(part)
        out_labels.append(np.full(len(part), label, dtype=np.uint8))
    merged = PointCloud(np.vstack(out_pts), FRAME_WORLD)
    return LabeledCloud(merged, np.concatenate(out_labels))


def append_alignment_log(path, scan_index: int, result: IcpResult,
                         angles: np.ndarray, header: bool = False) -> None:
    """Append one row of the alignment run log CSV."""
    mode = "w" if header else "a"
    with open(path, mode) as fh:
        if header:
            fh.write("scan_index,tx,ty,tz,yaw,pitch,roll,mse,iterations,elapsed_s\n")
        t = result.transform.translation
        vals = [scan_index, t[0], t[1], t[2], angles[0], angles[1], angles[2],
                result.final_mse, result.iterations, result.elapsed]
        fh.write(",".join(format(v, ".9g") if isinstance(v, float) else str(v)
                          for v in vals) + "\n")
