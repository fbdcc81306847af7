"""Placement of recovered human meshes in the world frame.

The mesh-local frame sits at the waist with its y and z axes opposed to the
world frame's, so placement rotates 180 degrees about x, applies the camera
rotation, and translates to the tracked world-frame center point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, rot_x


@dataclass
class Mesh:
    """Triangle mesh: (N, 3) float vertices, (M, 3) int vertex indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise ValueError("face index out of range")


R_WAIST_FLIP = rot_x(180.0)


def human_to_world(R_i: np.ndarray, p_w: np.ndarray) -> Pose:
    """Mesh-to-world pose: rotation R_i * Rx(180), translation p_w."""
    R_i = np.asarray(R_i, dtype=float)
    if np.abs(R_i.T @ R_i - np.eye(3)).max() > 1e-6 or np.linalg.det(R_i) < 0:
        raise ValueError("camera rotation is not a proper rotation matrix")
    p = np.asarray(p_w, dtype=float).reshape(-1)[:3]
    return Pose(R_i @ R_WAIST_FLIP, p)


def transform_mesh(m: Mesh, T: Pose) -> Mesh:
    """Apply a rigid transform to every vertex; faces are unchanged."""
    return Mesh(T.apply(m.vertices), m.faces.copy())
