"""Synthetic depth-scene generator used as the ground-truth oracle.

Scenes are built from axis-aligned planes and boxes plus moving box-shaped
actors on piecewise-linear paths, viewed by a camera on a scripted pose
path. Rendering is a per-pixel ray cast; the generator emits a TUM-style
on-disk dataset with ground-truth poses, detections, and actor trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import fileio
from .evaluation import Trajectory
from .geometry import Intrinsics, Pose, quat_to_rot, rot_to_quat, slerp
from .separation import Detection

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Box:
    """World-frame axis-aligned box."""

    center: np.ndarray
    size: np.ndarray

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.size, dtype=float) / 2.0
        return c - h, c + h


@dataclass(frozen=True)
class Plane:
    """Infinite axis-aligned plane (coordinate `axis` equals `offset`)."""

    axis: str
    offset: float


@dataclass
class Actor:
    """Box-shaped moving object on a piecewise-linear world path."""

    size: np.ndarray
    path: list  # (time, center 3-vector), times increasing

    def center_at(self, t: float) -> np.ndarray:
        times = np.array([p[0] for p in self.path])
        pos = np.array([p[1] for p in self.path], dtype=float)
        return np.array([np.interp(t, times, pos[:, i]) for i in range(3)])

    def box_at(self, t: float) -> Box:
        return Box(self.center_at(t), np.asarray(self.size, dtype=float))


@dataclass
class SyntheticScene:
    intrinsics: Intrinsics
    planes: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    actors: list = field(default_factory=list)
    camera: list = field(default_factory=list)  # (time, Pose), times increasing
    noise_sigma: float = 0.0
    frame_rate: float = 30.0
    duration: float = 1.0
    seed: int = 0
    depth_scale: float = fileio.DEFAULT_DEPTH_SCALE

    def camera_pose(self, t: float) -> Pose:
        """Camera pose at time t: lerp translation, slerp rotation."""
        times = [c[0] for c in self.camera]
        if t <= times[0]:
            return self.camera[0][1]
        if t >= times[-1]:
            return self.camera[-1][1]
        j = int(np.searchsorted(times, t, side="right"))
        t0, p0 = self.camera[j - 1]
        t1, p1 = self.camera[j]
        a = (t - t0) / (t1 - t0)
        q = slerp(rot_to_quat(p0.rotation), rot_to_quat(p1.rotation), a)
        trans = (1 - a) * p0.translation + a * p1.translation
        return Pose(quat_to_rot(*q), trans)

    def frame_times(self) -> np.ndarray:
        n = int(round(self.duration * self.frame_rate))
        return np.arange(n) / self.frame_rate


def _ray_plane(origins, dirs, plane: Plane):
    a = _AXES[plane.axis]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (plane.offset - origins[a]) / dirs[..., a]
    t[~np.isfinite(t)] = np.inf
    t[t <= 1e-6] = np.inf
    return t


def _ray_box(origins, dirs, box: Box):
    lo, hi = box.bounds()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    t1 = (lo - origins) * inv
    t2 = (hi - origins) * inv
    tmin = np.minimum(t1, t2).max(axis=-1)
    tmax = np.maximum(t1, t2).min(axis=-1)
    hit = (tmax >= tmin) & (tmax > 1e-6)
    t = np.where(tmin > 1e-6, tmin, tmax)
    t = np.where(hit, t, np.inf)
    return t


def render_depth(scene: SyntheticScene, t: float,
                 noise: bool = True) -> np.ndarray:
    """Ray-cast a depth frame at time t; misses are 0.

    The returned value per pixel is the camera-frame z of the nearest hit.
    Noise (when enabled and sigma > 0) is Gaussian, seeded by the scene seed
    and the frame index so renders are reproducible.
    """
    k = scene.intrinsics
    pose = scene.camera_pose(t)
    u = np.arange(k.width)[None, :]
    v = np.arange(k.height)[:, None]
    d_cam = np.stack(
        [np.broadcast_to((u - k.cx) / k.fx, (k.height, k.width)),
         np.broadcast_to((v - k.cy) / k.fy, (k.height, k.width)),
         np.ones((k.height, k.width))], axis=-1)
    dirs = d_cam @ pose.rotation.T
    origin = pose.translation

    depth = np.full((k.height, k.width), np.inf)
    for plane in scene.planes:
        depth = np.minimum(depth, _ray_plane(origin, dirs, plane))
    for box in scene.boxes:
        depth = np.minimum(depth, _ray_box(origin, dirs, box))
    for actor in scene.actors:
        depth = np.minimum(depth, _ray_box(origin, dirs, actor.box_at(t)))

    hit = np.isfinite(depth)
    depth = np.where(hit, depth, 0.0)
    if noise and scene.noise_sigma > 0:
        frame = int(round(t * scene.frame_rate))
        rng = np.random.default_rng([scene.seed, frame])
        noisy = depth + rng.normal(0.0, scene.noise_sigma, depth.shape)
        depth = np.where(hit, np.maximum(noisy, 1e-4), 0.0)
    return depth


def gt_detection(actor: Actor, cam_pose: Pose, k: Intrinsics,
                 t: float) -> Detection | None:
    """Tight pixel bounding box of the actor's projected corners.

    Covers every pixel the actor can occupy; None when the actor is outside
    the frustum (any corner behind the camera counts as outside).
    """
    lo, hi = actor.box_at(t).bounds()
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    cam = (corners - cam_pose.translation) @ cam_pose.rotation
    if (cam[:, 2] <= 1e-6).any():
        return None
    u = k.fx * cam[:, 0] / cam[:, 2] + k.cx
    v = k.fy * cam[:, 1] / cam[:, 2] + k.cy
    x_ul = max(0, math.floor(u.min()))
    y_ul = max(0, math.floor(v.min()))
    x_lr = min(k.width, math.floor(u.max()) + 1)
    y_lr = min(k.height, math.floor(v.max()) + 1)
    if x_ul >= x_lr or y_ul >= y_lr:
        return None
    return Detection(x_ul, y_ul, x_lr, y_lr, confidence=1.0)


def generate_sequence(scene: SyntheticScene, out_dir) -> Path:
    """Render the whole sequence to a TUM-style dataset directory."""
    out = Path(out_dir)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    times = scene.frame_times()

    det_records = []
    index_lines = []
    poses = []
    for i, t in enumerate(times):
        depth = render_depth(scene, t)
        name = f"depth/{i:06d}.png"
        fileio.write_depth_png(depth, out / name, scene.depth_scale)
        index_lines.append(f"{t:.6f} {name}")
        pose = scene.camera_pose(t)
        poses.append(pose)
        dets = []
        for actor in scene.actors:
            det = gt_detection(actor, pose, scene.intrinsics, t)
            if det is not None:
                dets.append(det)
        if dets:
            det_records.append((t, dets))

    (out / "depth.txt").write_text("\n".join(index_lines) + "\n")
    fileio.write_trajectory(Trajectory(times, poses), out / "groundtruth.txt")
    fileio.write_detections(det_records, out / "detections.txt")
    (out / "tracks_gt").mkdir(exist_ok=True)
    for i, actor in enumerate(scene.actors):
        pts = [(t, actor.center_at(t)) for t in times]
        fileio.write_track(pts, out / "tracks_gt" / f"actor_{i}.txt")
    fileio.write_metadata({
        "depth_scale": scene.depth_scale,
        "seed": scene.seed,
        "frame_rate": scene.frame_rate,
        "frames": len(times),
        "noise_sigma": scene.noise_sigma,
        "fx": scene.intrinsics.fx,
        "fy": scene.intrinsics.fy,
        "cx": scene.intrinsics.cx,
        "cy": scene.intrinsics.cy,
        "width": scene.intrinsics.width,
        "height": scene.intrinsics.height,
    }, out / "metadata.txt")
    return out


# ------------------------------------------------------------ scene files

def _pose_from_entry(entry) -> Pose:
    pos = np.asarray(entry.get("pos", [0, 0, 0]), dtype=float)
    if "quat" in entry:
        qx, qy, qz, qw = entry["quat"]
        return Pose(quat_to_rot(qx, qy, qz, qw), pos)
    rx, ry, rz = np.deg2rad(np.asarray(entry.get("rpy_deg", [0, 0, 0]), dtype=float))
    cx_, sx = np.cos(rx), np.sin(rx)
    cy_, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx_, -sx], [0, sx, cx_]])
    Ry = np.array([[cy_, 0, sy], [0, 1, 0], [-sy, 0, cy_]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Pose(Rz @ Ry @ Rx, pos)


def load_scene(path) -> SyntheticScene:
    """Parse a YAML scene description."""
    with open(path) as f:
        raw = yaml.safe_load(f)
    try:
        ki = raw["intrinsics"]
        k = Intrinsics(fx=float(ki["fx"]), fy=float(ki["fy"]),
                       cx=float(ki["cx"]), cy=float(ki["cy"]),
                       width=int(ki["width"]), height=int(ki["height"]))
        planes = [Plane(p["axis"], float(p["offset"]))
                  for p in raw.get("planes", [])]
        boxes = [Box(np.asarray(b["center"], dtype=float),
                     np.asarray(b["size"], dtype=float))
                 for b in raw.get("boxes", [])]
        actors = [Actor(np.asarray(a["size"], dtype=float),
                        [(float(w["t"]), np.asarray(w["pos"], dtype=float))
                         for w in a["path"]])
                  for a in raw.get("actors", [])]
        camera = [(float(c["t"]), _pose_from_entry(c)) for c in raw["camera"]]
    except (KeyError, TypeError, ValueError) as e:
        raise fileio.FileFormatError(path, f"bad scene description: {e}") from None
    return SyntheticScene(
        intrinsics=k, planes=planes, boxes=boxes, actors=actors, camera=camera,
        noise_sigma=float(raw.get("noise_sigma", 0.0)),
        frame_rate=float(raw.get("frame_rate", 30.0)),
        duration=float(raw.get("duration", 1.0)),
        seed=int(raw.get("seed", 0)),
        depth_scale=float(raw.get("depth_scale", fileio.DEFAULT_DEPTH_SCALE)),
    )
