"""Absolute trajectory error: timestamp association, rigid alignment, RMSE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose

DEFAULT_MAX_DT = 0.02


@dataclass
class Trajectory:
    """Timestamped camera poses in the world frame."""

    times: np.ndarray
    poses: list[Pose]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        if len(self.times) != len(self.poses):
            raise ValueError("timestamp/pose count mismatch")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("timestamps must strictly increase")

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.poses)


def associate_by_time(est: Trajectory, gt: Trajectory,
                      max_dt: float = DEFAULT_MAX_DT) -> list[tuple[int, int]]:
    """Greedy one-to-one pairing of indices minimizing |dt|.

    Pairs further apart than max_dt are discarded; raises if nothing pairs.
    """
    if len(est) == 0 or len(gt) == 0:
        raise ValueError("cannot associate an empty trajectory")
    cands = []
    for i, te in enumerate(est.times):
        for j, tg in enumerate(gt.times):
            dt = abs(te - tg)
            if dt <= max_dt:
                cands.append((dt, i, j))
    cands.sort()
    used_e, used_g = set(), set()
    pairs = []
    for _, i, j in cands:
        if i in used_e or j in used_g:
            continue
        used_e.add(i)
        used_g.add(j)
        pairs.append((i, j))
    if not pairs:
        raise ValueError("trajectories have no temporal overlap within max_dt")
    pairs.sort()
    return pairs


def align_rigid(est_pts: np.ndarray, gt_pts: np.ndarray) -> Pose:
    """Least-squares rigid transform S minimizing sum ||gt - S(est)||^2.

    Closed-form SVD solution (Horn/Arun), no scale. Requires at least 3
    non-collinear point pairs.
    """
    A = np.asarray(est_pts, dtype=float).reshape(-1, 3)
    B = np.asarray(gt_pts, dtype=float).reshape(-1, 3)
    if len(A) != len(B) or len(A) < 3:
        raise ValueError("need at least 3 point pairs")
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    H = (A - ca).T @ (B - cb)
    U, S, Vt = np.linalg.svd(H)
    if S[1] < 1e-12 * max(S[0], 1e-300):
        raise np.linalg.LinAlgError("degenerate (collinear) point geometry")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    return Pose(R, t)


def ate_rmse(est_pts: np.ndarray, gt_pts: np.ndarray,
             alignment: Pose | None = None) -> float:
    """Root-mean-square position error after applying `alignment` to est."""
    A = np.asarray(est_pts, dtype=float).reshape(-1, 3)
    B = np.asarray(gt_pts, dtype=float).reshape(-1, 3)
    if len(A) != len(B) or len(A) == 0:
        raise ValueError("need at least one point pair")
    if alignment is not None:
        A = alignment.apply(A)
    return float(np.sqrt(np.mean(np.sum((B - A) ** 2, axis=1))))


@dataclass
class AteResult:
    rmse: float
    alignment: Pose
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))


def evaluate_ate(est: Trajectory, gt: Trajectory,
                 max_dt: float = DEFAULT_MAX_DT, align: bool = True) -> AteResult:
    """Full ATE pipeline: associate, rigidly align, per-frame errors, RMSE."""
    pairs = associate_by_time(est, gt, max_dt)
    e = np.array([est.poses[i].translation for i, _ in pairs])
    g = np.array([gt.poses[j].translation for _, j in pairs])
    S = align_rigid(e, g) if align and len(pairs) >= 3 else Pose.identity()
    aligned = S.apply(e)
    errors = np.linalg.norm(g - aligned, axis=1)
    times = np.array([est.times[i] for i, _ in pairs])
    return AteResult(rmse=float(np.sqrt(np.mean(errors ** 2))),
                     alignment=S, times=times, errors=errors)
