"""End-to-end pipeline: filter, odometry, tracking, fusion, reporting."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio, mapping, odometry, separation, tracking
from .config import PipelineConfig
from .evaluation import Trajectory
from .geometry import Intrinsics, Pose, compose

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    trajectory: Trajectory
    tracks: list
    cloud: mapping.PointCloud
    timings: list = field(default_factory=list)  # per-frame stage dicts, ms
    divergent_frames: int = 0


def run_pipeline(frames, detection_groups, k: Intrinsics,
                 cfg: PipelineConfig | None = None,
                 use_filter: bool = True,
                 fuse: bool = True) -> PipelineResult:
    """Process an iterable of FrameBundles.

    `detection_groups` is the (timestamp, detections) list from
    fileio.read_detections; detections are matched to frames by nearest
    timestamp. With `use_filter` off (ablation), odometry and fusion run on
    the raw depth. Odometry divergence keeps the previous relative pose.
    """
    cfg = cfg or PipelineConfig()
    ocfg = cfg.odometry(k.width)
    tracker = tracking.Tracker(cfg.association())
    cloud = mapping.PointCloud.empty()

    times = []
    poses = []
    timings = []
    world = Pose.identity()
    prev_bg = None
    last_rel = Pose.identity()
    divergent = 0

    for frame in frames:
        stamp = frame.timestamp
        dets = frame.detections or fileio.detections_near(detection_groups, stamp)
        row = {"timestamp": stamp, "filter": 0.0, "odometry": 0.0,
               "tracking": 0.0, "fusion": 0.0}

        t0 = time.perf_counter()
        dets = separation.filter_detections(dets, k.width, k.height, cfg.confidence)
        sep = separation.separate_and_filter(
            frame.depth, dets, cfg.magnify, cfg.bin_width,
            cfg.bg_margin, cfg.human_margin)
        row["filter"] = (time.perf_counter() - t0) * 1e3
        bg = sep.background if use_filter else frame.depth

        t0 = time.perf_counter()
        pyr = odometry.FramePyramid(bg, k, ocfg)
        if prev_bg is not None:
            try:
                report = odometry.estimate_pose(prev_bg, pyr, k, init=last_rel, cfg=ocfg)
                if report.diverged:
                    divergent += 1
                    log.warning("odometry diverged at t=%.6f, keeping previous motion", stamp)
                else:
                    last_rel = report.pose
            except odometry.InsufficientDataError:
                divergent += 1
                log.warning("odometry skipped at t=%.6f: too few valid pixels", stamp)
            world = compose(world, last_rel)
        prev_bg = pyr
        row["odometry"] = (time.perf_counter() - t0) * 1e3
        times.append(stamp)
        poses.append(world)

        t0 = time.perf_counter()
        observations = []
        for det, part in sep.parts:
            valid = part[part > 0]
            if valid.size == 0:
                continue  # counts as a miss for whichever track it belonged to
            d_m = float(valid.mean())
            p_c = tracking.center_point(det, d_m, k)
            observations.append(tracking.to_world(p_c, world))
        tracker.step(stamp, observations)
        row["tracking"] = (time.perf_counter() - t0) * 1e3

        if fuse:
            t0 = time.perf_counter()
            cloud = mapping.fuse_frame(cloud, bg, world, k, cfg.fuse_stride)
            row["fusion"] = (time.perf_counter() - t0) * 1e3
        timings.append(row)

    if fuse and len(cloud):
        cloud = mapping.voxel_downsample(cloud, cfg.voxel)
    return PipelineResult(
        trajectory=Trajectory(np.array(times), poses),
        tracks=tracker.all_tracks(),
        cloud=cloud,
        timings=timings,
        divergent_frames=divergent,
    )


def write_outputs(result: PipelineResult, out_dir):
    """Write camera_trajectory.txt, track_<id>.txt, map.ply, timing.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_trajectory(result.trajectory, out / "camera_trajectory.txt")
    for tr in result.tracks:
        fileio.write_track(tr.points, out / f"track_{tr.id}.txt")
    fileio.write_ply(result.cloud, out / "map.ply")
    with open(out / "timing.csv", "w") as f:
        f.write("timestamp,filter_ms,odometry_ms,tracking_ms,fusion_ms\n")
        for row in result.timings:
            f.write(f"{row['timestamp']:.6f},{row['filter']:.3f},"
                    f"{row['odometry']:.3f},{row['tracking']:.3f},"
                    f"{row['fusion']:.3f}\n")


def intrinsics_from_metadata(dataset_dir, fallback: Intrinsics | None = None) -> Intrinsics:
    """Read camera intrinsics from a dataset metadata.txt when present."""
    meta_path = Path(dataset_dir) / "metadata.txt"
    if meta_path.exists():
        meta = fileio.read_metadata(meta_path)
        keys = ("fx", "fy", "cx", "cy", "width", "height")
        if all(key in meta for key in keys):
            return Intrinsics(fx=float(meta["fx"]), fy=float(meta["fy"]),
                              cx=float(meta["cx"]), cy=float(meta["cy"]),
                              width=int(meta["width"]), height=int(meta["height"]))
    if fallback is None:
        raise fileio.FileFormatError(meta_path, "no intrinsics available")
    return fallback
