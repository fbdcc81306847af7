"""Per-human 3D trajectory tracking.

Each confirmed detection is reduced to a single world-frame center point
(bounding-box center back-projected at the mean depth of its filtered part,
then lifted by the camera pose) and associated to live tracks by greedy
nearest-neighbor matching with a distance gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Intrinsics, Pose
from .separation import Detection


@dataclass(frozen=True)
class AssociationConfig:
    gate: float = 0.8          # max match distance, meters
    max_misses: int = 15       # consecutive unmatched frames before a track dies

    def __post_init__(self):
        if self.gate <= 0 or self.max_misses < 0:
            raise ValueError("bad association configuration")


@dataclass
class Track:
    id: int
    points: list = field(default_factory=list)  # (timestamp, world 3-vector)
    misses: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.points[-1][1]

    def add(self, timestamp: float, p: np.ndarray):
        if self.points and timestamp <= self.points[-1][0]:
            raise ValueError("track timestamps must strictly increase")
        self.points.append((timestamp, np.asarray(p, dtype=float)))


def mean_depth(part: np.ndarray) -> float:
    """Arithmetic mean of the valid (nonzero) depths of a human part."""
    v = part[part > 0]
    if v.size == 0:
        raise ValueError("human part has no valid depth")
    return float(v.mean())


def center_point(box: Detection, d_m: float, k: Intrinsics) -> np.ndarray:
    """Homogeneous camera-frame 3D point of the box center at depth d_m."""
    if d_m <= 0:
        raise ValueError("mean depth must be positive")
    x = (box.x_ul + box.x_lr - 2 * k.cx) / (2 * k.fx) * d_m
    y = (box.y_ul + box.y_lr - 2 * k.cy) / (2 * k.fy) * d_m
    return np.array([x, y, d_m, 1.0])


def to_world(p_c: np.ndarray, pose: Pose) -> np.ndarray:
    """Camera-frame point (homogeneous or 3D) to a world-frame 3-vector."""
    return pose.apply(np.asarray(p_c, dtype=float)[:3])


def greedy_match(track_positions, observations, gate: float):
    """Greedy one-to-one matching in ascending pairwise-distance order.

    Returns (track_index, observation_index) pairs. Ties are broken by
    (track index, observation index) so identical inputs always yield
    identical assignments.
    """
    pairs = []
    for i, tp in enumerate(track_positions):
        for j, ob in enumerate(observations):
            d = float(np.linalg.norm(np.asarray(tp) - np.asarray(ob)))
            if d <= gate:
                pairs.append((d, i, j))
    pairs.sort()
    used_t, used_o = set(), set()
    matches = []
    for _, i, j in pairs:
        if i in used_t or j in used_o:
            continue
        used_t.add(i)
        used_o.add(j)
        matches.append((i, j))
    return matches


class Tracker:
    """Maintains live tracks across frames."""

    def __init__(self, cfg: AssociationConfig | None = None):
        self.cfg = cfg or AssociationConfig()
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self._next_id = 0

    def step(self, timestamp: float, observations) -> list[tuple[int, int]]:
        """Associate world-frame observations at one timestamp.

        Returns (track id, observation index) matches. Unmatched observations
        spawn new tracks; tracks unmatched for more than `max_misses`
        consecutive frames are retired.
        """
        observations = [np.asarray(o, dtype=float) for o in observations]
        matches = greedy_match([t.position for t in self.tracks],
                               observations, self.cfg.gate)
        matched_t = {i for i, _ in matches}
        matched_o = {j for _, j in matches}

        result = []
        for i, j in matches:
            self.tracks[i].add(timestamp, observations[j])
            self.tracks[i].misses = 0
            result.append((self.tracks[i].id, j))

        for i, tr in enumerate(self.tracks):
            if i not in matched_t:
                tr.misses += 1

        for j, ob in enumerate(observations):
            if j not in matched_o:
                tr = Track(id=self._next_id)
                self._next_id += 1
                tr.add(timestamp, ob)
                self.tracks.append(tr)
                result.append((tr.id, j))

        alive, dead = [], []
        for tr in self.tracks:
            (dead if tr.misses > self.cfg.max_misses else alive).append(tr)
        self.tracks = alive
        self.finished.extend(dead)
        return result

    def all_tracks(self) -> list[Track]:
        return sorted(self.finished + self.tracks, key=lambda t: t.id)
