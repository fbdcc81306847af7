"""World-frame point cloud accumulation with voxel downsampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, Pose, depth_to_points


@dataclass
class PointCloud:
    """(N, 3) float points, optional (N, 3) uint8 colors."""

    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != len(self.points):
                raise ValueError("color/point count mismatch")

    @staticmethod
    def empty() -> "PointCloud":
        return PointCloud(np.zeros((0, 3)))

    def __len__(self) -> int:
        return len(self.points)


def fuse_frame(cloud: PointCloud, depth: np.ndarray, pose: Pose,
               k: Intrinsics, stride: int = 1) -> PointCloud:
    """Back-project every stride-th valid pixel into the world and append."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    pts = depth_to_points(depth, k)[::stride, ::stride]
    d = depth[::stride, ::stride]
    cam_pts = pts[d > 0]
    if cam_pts.size == 0:
        return cloud
    world = pose.apply(cam_pts)
    return PointCloud(np.vstack([cloud.points, world]))


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """Replace all points in each cubic voxel by their centroid."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return PointCloud.empty()
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    # lexicographic grouping of voxel keys
    order = np.lexsort(keys.T)
    sk = keys[order]
    sp = cloud.points[order]
    new_group = np.ones(len(sk), dtype=bool)
    new_group[1:] = (sk[1:] != sk[:-1]).any(axis=1)
    group_ids = np.cumsum(new_group) - 1
    n_groups = group_ids[-1] + 1
    sums = np.zeros((n_groups, 3))
    np.add.at(sums, group_ids, sp)
    counts = np.bincount(group_ids)
    return PointCloud(sums / counts[:, None])
