"""Frame-to-frame depth odometry.

Point-to-plane ICP with projective association over an image pyramid,
Gauss-Newton on a 6-vector twist with step halving. Pixels of the current
frame are matched against the point/normal maps of the previous frame; the
estimated pose maps current-frame points into the previous camera frame.

`FramePyramid` caches the per-level maps of one frame so a streaming caller
pays the preprocessing cost once per frame instead of twice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, Pose, compose, depth_to_points, se3_exp


@dataclass(frozen=True)
class OdometryConfig:
    pyramid_levels: int = 3
    max_iterations: int = 10
    convergence_eps: float = 1e-6
    huber_delta: float = 0.05
    normal_discontinuity: float = 0.1
    max_correspondence_dist: float = 0.25
    min_valid_pixels: int = 1000
    source_stride: int = 1  # subsampling of source pixels at every pyramid level

    def __post_init__(self):
        if self.pyramid_levels < 1 or self.convergence_eps <= 0:
            raise ValueError("bad odometry configuration")


@dataclass
class OdometryReport:
    pose: Pose
    iterations: int
    residual_rms: float
    inlier_count: int
    diverged: bool = False


class InsufficientDataError(ValueError):
    """Raised when a frame has too few valid pixels to track."""


def downsample_depth(depth: np.ndarray) -> np.ndarray:
    """Halve resolution, averaging only the valid pixels of each 2x2 block."""
    h, w = depth.shape
    h2, w2 = h // 2, w // 2
    d = depth[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    valid = d > 0
    count = valid.sum(axis=(1, 3))
    total = np.where(valid, d, 0).sum(axis=(1, 3))
    out = np.zeros((h2, w2), dtype=depth.dtype)
    np.divide(total, count, out=out, where=count > 0)
    return out


def compute_normals(depth: np.ndarray, k: Intrinsics,
                    discontinuity: float = 0.1) -> np.ndarray:
    """Per-pixel unit normals from central differences of the point map.

    Pixels next to a depth discontinuity or with invalid neighbors get a zero
    normal. Normals are oriented toward the camera.
    """
    dt = depth.dtype if depth.dtype in (np.float32, np.float64) else np.float64
    h, w = depth.shape
    u = ((np.arange(w, dtype=dt) - dt.type(k.cx)) / dt.type(k.fx))[None, :]
    v = ((np.arange(h, dtype=dt) - dt.type(k.cy)) / dt.type(k.fy))[:, None]
    x = u * depth
    y = v * depth
    z = depth

    c = slice(1, -1)
    dzdu = z[c, 2:] - z[c, :-2]
    dzdv = z[2:, c] - z[:-2, c]
    ok = (z[c, c] > 0) & (z[c, 2:] > 0) & (z[c, :-2] > 0) \
        & (z[2:, c] > 0) & (z[:-2, c] > 0) \
        & (np.abs(dzdu) < discontinuity) & (np.abs(dzdv) < discontinuity)

    dxdu = x[c, 2:] - x[c, :-2]
    dydu = y[c, 2:] - y[c, :-2]
    dxdv = x[2:, c] - x[:-2, c]
    dydv = y[2:, c] - y[:-2, c]
    cx_ = dydu * dzdv - dzdu * dydv
    cy_ = dzdu * dxdv - dxdu * dzdv
    cz_ = dxdu * dydv - dydu * dxdv
    norm = np.sqrt(cx_ * cx_ + cy_ * cy_ + cz_ * cz_)
    ok &= norm > 1e-12
    inv = np.zeros_like(norm)
    np.divide(1.0, norm, out=inv, where=ok)
    # flip to face the camera (viewing ray has positive z toward the scene)
    sign = np.where(cx_ * x[c, c] + cy_ * y[c, c] + cz_ * z[c, c] > 0, -inv, inv)
    n = np.zeros((h, w, 3), dtype=dt)
    n[c, c, 0] = cx_ * sign
    n[c, c, 1] = cy_ * sign
    n[c, c, 2] = cz_ * sign
    return n


class FramePyramid:
    """Cached multi-level depth, point, normal, and source-point maps."""

    def __init__(self, depth: np.ndarray, k: Intrinsics, cfg: OdometryConfig):
        self.cfg = cfg
        depth = np.ascontiguousarray(depth, dtype=np.float32)
        self.depths = [depth]
        self.intrinsics = [k]
        for _ in range(cfg.pyramid_levels - 1):
            depth = downsample_depth(depth)
            k = k.scaled(0.5)
            self.depths.append(depth)
            self.intrinsics.append(k)
        self._points: dict[int, np.ndarray] = {}
        self._normals: dict[int, np.ndarray] = {}
        self._sources: dict[tuple[int, int], np.ndarray] = {}

    @property
    def valid_pixels(self) -> int:
        return int((self.depths[0] > 0).sum())

    def points(self, level: int) -> np.ndarray:
        if level not in self._points:
            self._points[level] = depth_to_points(
                self.depths[level], self.intrinsics[level]).astype(np.float32)
        return self._points[level]

    def normals(self, level: int) -> np.ndarray:
        if level not in self._normals:
            self._normals[level] = compute_normals(
                self.depths[level], self.intrinsics[level],
                self.cfg.normal_discontinuity)
        return self._normals[level]

    def source_points(self, level: int, stride: int) -> np.ndarray:
        key = (level, stride)
        if key not in self._sources:
            d = self.depths[level][::stride, ::stride]
            pts = self.points(level)[::stride, ::stride]
            self._sources[key] = pts[d > 0]
        return self._sources[key]


def residual_and_jacobian(src_pts: np.ndarray, tgt_pts: np.ndarray,
                          normals: np.ndarray, twist: np.ndarray):
    """Point-to-plane residuals and their Jacobian.

    Residual i is n_i . (T p_i - q_i) with T = exp(twist); the Jacobian is
    taken with respect to a left-multiplied increment exp(delta) T at
    delta = 0 (twist ordered translation-first). Correspondences whose
    normal is degenerate (zero norm) are dropped.
    """
    src_pts = np.asarray(src_pts, dtype=float).reshape(-1, 3)
    tgt_pts = np.asarray(tgt_pts, dtype=float).reshape(-1, 3)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(normals, axis=1)
    keep = norms > 1e-8
    p, q, n = src_pts[keep], tgt_pts[keep], normals[keep] / norms[keep, None]

    T = se3_exp(twist)
    tp = T.apply(p)
    r = ((tp - q) * n).sum(axis=1)
    J = np.empty((len(r), 6))
    J[:, :3] = n
    J[:, 3:] = np.cross(tp, n)
    return r, J


def _huber_weights(r: np.ndarray, delta: float) -> np.ndarray:
    a = np.abs(r)
    w = np.ones_like(r)
    big = a > delta
    w[big] = delta / a[big]
    return w


def _associate(src_pts, T: Pose, tgt_points, tgt_normals, k: Intrinsics,
               max_dist: float):
    """Projective association of transformed source points into the target."""
    R32 = T.rotation.astype(np.float32)
    t32 = T.translation.astype(np.float32)
    tp = src_pts @ R32.T + t32
    z = tp[:, 2]
    ok = z > 1e-6
    u = np.full(len(tp), -1, dtype=np.int64)
    v = np.full(len(tp), -1, dtype=np.int64)
    u[ok] = np.rint(k.fx * tp[ok, 0] / z[ok] + k.cx).astype(np.int64)
    v[ok] = np.rint(k.fy * tp[ok, 1] / z[ok] + k.cy).astype(np.int64)
    ok &= (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)

    tp = tp[ok]
    q = tgt_points[v[ok], u[ok]]
    n = tgt_normals[v[ok], u[ok]]
    ok2 = (q[:, 2] > 0) & (np.abs(n).sum(axis=1) > 0)
    diff = tp - q
    ok2 &= (diff * diff).sum(axis=1) < max_dist * max_dist
    return tp[ok2], q[ok2], n[ok2]


def _rms(tp, q, n) -> float:
    r = ((tp - q) * n).sum(axis=1)
    return float(np.sqrt(np.mean(r.astype(np.float64) ** 2)))


def estimate_pose(prev, curr, k: Intrinsics,
                  init: Pose | None = None,
                  cfg: OdometryConfig | None = None) -> OdometryReport:
    """Relative pose of the current frame with respect to the previous one.

    `prev` and `curr` are depth images or prebuilt FramePyramids. Returns T
    such that T maps current-camera points into the previous camera frame;
    chain world poses as T_w_curr = T_w_prev * T.
    """
    cfg = cfg or OdometryConfig()
    init = init or Pose.identity()
    if not isinstance(prev, FramePyramid):
        prev = FramePyramid(np.asarray(prev), k, cfg)
    if not isinstance(curr, FramePyramid):
        curr = FramePyramid(np.asarray(curr), k, cfg)
    if prev.valid_pixels < cfg.min_valid_pixels or curr.valid_pixels < cfg.min_valid_pixels:
        raise InsufficientDataError("not enough valid depth pixels to track")

    T = init
    total_iters = 0
    rms = 0.0
    inliers = 0
    diverged = False

    for level in range(cfg.pyramid_levels - 1, -1, -1):
        lk = prev.intrinsics[level]
        tgt_points = prev.points(level)
        tgt_normals = prev.normals(level)
        src_pts = curr.source_points(level, cfg.source_stride)

        best_rms = None
        level_start_rms = None
        cached = None
        for _ in range(cfg.max_iterations):
            if cached is not None:
                tp, q, n = cached
            else:
                tp, q, n = _associate(src_pts, T, tgt_points, tgt_normals,
                                      lk, cfg.max_correspondence_dist)
            if len(tp) < 6:
                break
            r = ((tp - q) * n).sum(axis=1).astype(np.float64)
            if best_rms is None:
                best_rms = float(np.sqrt(np.mean(r ** 2)))
                level_start_rms = best_rms
                rms = best_rms
                inliers = len(tp)
            w = _huber_weights(r, cfg.huber_delta)
            J = np.empty((len(r), 6))
            J[:, :3] = n
            J[:, 3:] = np.cross(tp.astype(np.float64), n.astype(np.float64))
            Jw = J * w[:, None]
            A = J.T @ Jw
            b = -Jw.T @ r
            try:
                delta = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                break

            # step halving: accept the first candidate that does not raise
            # the RMS; accepted residuals are therefore non-increasing
            accepted = False
            alpha = 1.0
            for _half in range(5):
                T_cand = compose(se3_exp(alpha * delta), T)
                tp2, q2, n2 = _associate(src_pts, T_cand, tgt_points,
                                         tgt_normals, lk,
                                         cfg.max_correspondence_dist)
                if len(tp2) >= 6:
                    rms2 = _rms(tp2, q2, n2)
                    if rms2 <= best_rms + 1e-15:
                        T = T_cand
                        best_rms = rms2
                        rms = rms2
                        inliers = len(tp2)
                        cached = (tp2, q2, n2)
                        accepted = True
                        break
                alpha *= 0.5
            total_iters += 1
            if not accepted:
                # no improving step at any halving: local plateau, move on
                break
            if np.linalg.norm(alpha * delta) < cfg.convergence_eps:
                break
        if level == 0 and level_start_rms is not None and best_rms is not None:
            diverged = best_rms > level_start_rms + 1e-12

    if inliers == 0:
        # never found correspondences; report the initial guess honestly
        diverged = True
        rms = float("inf")
        T = init
    return OdometryReport(pose=T, iterations=total_iters, residual_rms=rms,
                          inlier_count=inliers, diverged=diverged)
