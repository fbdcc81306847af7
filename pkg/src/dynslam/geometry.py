"""Pinhole camera model and SE(3) utilities shared by the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics (no distortion)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled(self, factor: float) -> "Intrinsics":
        """Intrinsics of the same camera at `factor` times the resolution."""
        return Intrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5,
            cy=(self.cy + 0.5) * factor - 0.5,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )


@dataclass(frozen=True)
class Pose:
    """Rigid transform: 3x3 rotation plus translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one 3-vector or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def compose(a: Pose, b: Pose) -> Pose:
    """a then b applied right-to-left: (a*b).apply(p) == a.apply(b.apply(p))."""
    R = orthonormalize(a.rotation @ b.rotation)
    t = a.rotation @ b.translation + a.translation
    return Pose(R, t)


def invert(a: Pose) -> Pose:
    return Pose(a.rotation.T, -a.rotation.T @ a.translation)


def backproject(u: float, v: float, d: float, k: Intrinsics) -> np.ndarray:
    """Pixel plus metric depth to homogeneous camera-frame point."""
    if d <= 0:
        raise ValueError(f"depth must be positive, got {d}")
    return np.array([(u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d, 1.0])


def project(p: np.ndarray, k: Intrinsics) -> tuple[float, float, float]:
    """Camera-frame point to (u, v, depth). Point may be homogeneous or 3D."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[0], p[1], p[2]
    if z <= 0:
        raise ValueError("point is behind the camera")
    return (k.fx * x / z + k.cx, k.fy * y / z + k.cy, z)


def depth_to_points(depth: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Back-project a whole depth image to an (H, W, 3) camera-frame point map.

    Invalid (zero) pixels map to the origin; mask with `depth > 0`.
    """
    h, w = depth.shape
    u = np.arange(w)[None, :]
    v = np.arange(h)[:, None]
    x = (u - k.cx) / k.fx * depth
    y = (v - k.cy) / k.fy * depth
    return np.stack([x, y, depth], axis=-1)


def _hat(w: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def so3_exp(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    S = _hat(w)
    if theta < 1e-10:
        return np.eye(3) + S + 0.5 * S @ S
    return (np.eye(3)
            + S * np.sin(theta) / theta
            + S @ S * (1.0 - np.cos(theta)) / theta ** 2)


def so3_log(R: np.ndarray) -> np.ndarray:
    cos_theta = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta < 1e-10:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) * 0.5
    if theta > np.pi - 1e-6:
        raise ValueError("rotation angle too close to pi for a stable log")
    return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) \
        * theta / (2.0 * np.sin(theta))


def _so3_left_jacobian(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    S = _hat(w)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * S + S @ S / 6.0
    return (np.eye(3)
            + S * (1.0 - np.cos(theta)) / theta ** 2
            + S @ S * (theta - np.sin(theta)) / theta ** 3)


def se3_exp(xi: np.ndarray) -> Pose:
    """Twist (rho, omega) to pose; translation first, rotation last three."""
    xi = np.asarray(xi, dtype=float).reshape(6)
    rho, w = xi[:3], xi[3:]
    R = orthonormalize(so3_exp(w))
    t = _so3_left_jacobian(w) @ rho
    return Pose(R, t)


def se3_log(T: Pose) -> np.ndarray:
    w = so3_log(T.rotation)
    J_inv = np.linalg.inv(_so3_left_jacobian(w))
    rho = J_inv @ T.translation
    return np.concatenate([rho, w])


def rot_x(theta_deg: float) -> np.ndarray:
    """Rotation about the x axis; angle in degrees."""
    th = np.deg2rad(theta_deg)
    c, s = np.cos(th), np.sin(th)
    R = np.array([
        [1.0, 0.0, 0.0],
        [0.0, c, -s],
        [0.0, s, c],
    ])
    # snap the 180-degree case so downstream equality checks are exact
    return np.where(np.abs(R - np.round(R)) < 1e-15, np.round(R), R)


def quat_to_rot(qx: float, qy: float, qz: float, qw: float) -> np.ndarray:
    """Unit quaternion (x, y, z, w) to rotation matrix."""
    q = np.array([qx, qy, qz, qw], dtype=float)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("zero quaternion")
    x, y, z, w = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (x, y, z, w), w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2
        q = np.zeros(4)
        q[i] = 0.25 * s
        q[3] = (R[k, j] - R[j, k]) / s
        q[j] = (R[j, i] + R[i, j]) / s
        q[k] = (R[k, i] + R[i, k]) / s
        x, y, z, w = q
    q = np.array([x, y, z, w])
    if w < 0:
        q = -q
    return q / np.linalg.norm(q)


def slerp(q0: np.ndarray, q1: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical interpolation between unit quaternions (x, y, z, w)."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    dot = float(np.dot(q0, q1))
    if dot < 0:
        q1, dot = -q1, -dot
    if dot > 1.0 - 1e-9:
        q = (1 - alpha) * q0 + alpha * q1
        return q / np.linalg.norm(q)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    s = np.sin(theta)
    return (np.sin((1 - alpha) * theta) * q0 + np.sin(alpha * theta) * q1) / s
