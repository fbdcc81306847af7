"""Shared test utilities: brute-force oracles and synthetic scene builders.

The separation oracle below is an intentionally naive, loop-based
re-implementation of the box filtering stage. It shares no code with
dynslam.separation so the two can be compared bit-for-bit.
"""

import math

import numpy as np

from dynslam.geometry import Intrinsics, Pose
from dynslam.separation import Detection
from dynslam.synthetic import Actor, Box, Plane, SyntheticScene


# --------------------------------------------------------- separation oracle

def oracle_histogram_interval(values, bin_width):
    """Principal depth interval of a value list, plain-Python version."""
    counts = {}
    for v in values:
        if v > 0:
            b = math.floor(v / bin_width)
            counts[b] = counts.get(b, 0) + 1
    if not counts:
        return None
    # lowest bin index among count ties, matching argmax over a dense array
    best = max(counts.values())
    mode = min(b for b, c in counts.items() if c == best)
    half = best / 2.0
    lo = mode
    while counts.get(lo - 1, 0) >= half and lo - 1 >= 0:
        lo -= 1
    hi = mode
    while counts.get(hi + 1, 0) >= half:
        hi += 1
    return (lo * bin_width, (hi + 1) * bin_width)


def oracle_magnify(box, lam, width, height):
    cx = (box.x_ul + box.x_lr) / 2.0
    cy = (box.y_ul + box.y_lr) / 2.0
    hw = (box.x_lr - box.x_ul) * lam / 2.0
    hh = (box.y_lr - box.y_ul) * lam / 2.0
    return (max(0, math.floor(cx - hw)), max(0, math.floor(cy - hh)),
            min(width, math.ceil(cx + hw)), min(height, math.ceil(cy + hh)))


def oracle_separate_and_filter(depth, dets, lam=1.2, bin_width=0.2,
                               bg_margin=0.1, human_margin=0.2):
    """Loop-based transcription of separation plus outlier filtering.

    Returns (background, parts) where parts is a list of full-size arrays.
    """
    depth = np.asarray(depth)
    h, w = depth.shape
    dets = list(dets)

    owner = [[-1] * w for _ in range(h)]
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    for i in order:
        d = dets[i]
        for y in range(d.y_ul, d.y_lr):
            for x in range(d.x_ul, d.x_lr):
                if owner[y][x] == -1:
                    owner[y][x] = i

    background = np.zeros_like(depth)
    parts = [np.zeros_like(depth) for _ in dets]
    for y in range(h):
        for x in range(w):
            o = owner[y][x]
            if o == -1:
                background[y, x] = depth[y, x]
            else:
                parts[o][y, x] = depth[y, x]

    part_intervals = [
        oracle_histogram_interval([float(v) for v in p.ravel()], bin_width)
        for p in parts
    ]
    bg_interval = oracle_histogram_interval(
        [float(v) for v in depth.ravel()], bin_width)

    for t, det in enumerate(dets):
        x0, y0, x1, y1 = oracle_magnify(det, lam, w, h)
        part = parts[t]
        hi = part_intervals[t]
        for y in range(y0, y1):
            for x in range(x0, x1):
                if bg_interval is not None:
                    b = background[y, x]
                    if b > 0 and not (bg_interval[0] - bg_margin < b
                                      < bg_interval[1] + bg_margin):
                        background[y, x] = 0
                if hi is not None:
                    d = part[y, x]
                    if d > 0 and not (hi[0] - human_margin < d
                                      < hi[1] + human_margin):
                        background[y, x] = d
                        part[y, x] = 0
    return background, parts


def random_filter_frame(rng, max_side=32):
    """A small random frame with planted structure for oracle comparison."""
    h = int(rng.integers(8, max_side + 1))
    w = int(rng.integers(8, max_side + 1))
    depth = rng.uniform(2.5, 3.2, (h, w))
    depth[rng.random((h, w)) < 0.05] = 0.0  # invalid holes

    dets = []
    for _ in range(int(rng.integers(0, 4))):
        x0 = int(rng.integers(0, w - 2))
        y0 = int(rng.integers(0, h - 2))
        x1 = int(rng.integers(x0 + 1, w + 1))
        y1 = int(rng.integers(y0 + 1, h + 1))
        conf = float(rng.uniform(0.55, 1.0))
        dets.append(Detection(x0, y0, x1, y1, confidence=conf))
        # plant a "human" depth blob plus stray outliers inside the box
        depth[y0:y1, x0:x1] = rng.uniform(1.4, 1.7, (y1 - y0, x1 - x0))
    n_outliers = int(rng.integers(0, 12))
    ys = rng.integers(0, h, n_outliers)
    xs = rng.integers(0, w, n_outliers)
    depth[ys, xs] = rng.uniform(0.3, 6.0, n_outliers)
    return depth, dets


# ---------------------------------------------------------------- rotations

def rotation_angle_deg(Ra, Rb=None):
    """Geodesic angle between two rotations (or of one), in degrees."""
    R = Ra if Rb is None else Ra @ np.asarray(Rb).T
    c = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


# ------------------------------------------------------------ scene builders

def walled_room_scene(width=160, height=120, focal=120.0, duration=10.0,
                      noise_sigma=0.002, seed=7, actors=(), camera=None):
    """Closed room with furniture; geometry-rich enough to constrain ICP."""
    k = Intrinsics(fx=focal, fy=focal, cx=width / 2 - 0.5, cy=height / 2 - 0.5,
                   width=width, height=height)
    if camera is None:
        camera = [(0.0, Pose.identity())]
    return SyntheticScene(
        intrinsics=k,
        planes=[Plane("z", 3.5), Plane("y", 1.2), Plane("y", -1.2),
                Plane("x", -1.6), Plane("x", 1.6)],
        boxes=[Box(np.array([-1.2, 0.3, 3.1]), np.array([0.8, 0.9, 0.8])),
               Box(np.array([1.1, 0.6, 2.9]), np.array([0.9, 0.5, 0.7])),
               Box(np.array([0.1, -0.6, 3.3]), np.array([1.0, 0.6, 0.3]))],
        actors=list(actors),
        camera=camera,
        noise_sigma=noise_sigma,
        duration=duration,
        seed=seed,
    )


def uniform_wall_scene(actors, width=64, height=48, focal=48.0,
                       duration=3.0, frame_rate=15.0, noise_sigma=0.002,
                       seed=11):
    """Flat-background scene: actors moving in front of a single frontal wall.

    All background depth lives in one narrow band, so pixels the filter hands
    back to the background always land inside the widened background interval.
    """
    k = Intrinsics(fx=focal, fy=focal, cx=width / 2 - 0.5, cy=height / 2 - 0.5,
                   width=width, height=height)
    return SyntheticScene(
        intrinsics=k,
        planes=[Plane("z", 3.4)],
        actors=list(actors),
        camera=[(0.0, Pose.identity())],
        noise_sigma=noise_sigma,
        duration=duration,
        frame_rate=frame_rate,
        seed=seed,
    )


def crossing_actor(z=2.2, y=0.2, x0=-1.0, x1=1.0, t0=0.0, t1=3.0,
                   size=(0.5, 1.4, 0.15)):
    return Actor(np.asarray(size, dtype=float),
                 [(t0, np.array([x0, y, z])), (t1, np.array([x1, y, z]))])
