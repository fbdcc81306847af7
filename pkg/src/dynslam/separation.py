"""Depth-frame scene separation and residual outlier filtering.

A depth frame is split into a background image and one masked image per
human bounding box. Per-region depth histograms give a principal depth
interval for each region; pixels inside a magnified copy of each box whose
depth falls outside the relevant interval are either invalidated (background)
or handed back to the background (human parts).

Depth images are 2D float arrays in meters; 0 marks invalid pixels. Boxes
are half-open pixel ranges [x_ul, x_lr) x [y_ul, y_lr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_BIN_WIDTH = 0.2
DEFAULT_BG_MARGIN = 0.1
DEFAULT_HUMAN_MARGIN = 0.2
DEFAULT_MAGNIFY = 1.2
DEFAULT_CONFIDENCE = 0.5


@dataclass(frozen=True)
class Detection:
    """2D bounding box with detector confidence."""

    x_ul: int
    y_ul: int
    x_lr: int
    y_lr: int
    confidence: float = 1.0

    def __post_init__(self):
        if self.x_ul >= self.x_lr or self.y_ul >= self.y_lr:
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x_lr - self.x_ul

    @property
    def height(self) -> int:
        return self.y_lr - self.y_ul


@dataclass(frozen=True)
class DepthInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi or self.lo < 0:
            raise ValueError(f"bad interval ({self.lo}, {self.hi})")

    def contains(self, d: float, margin: float = 0.0) -> bool:
        """Open-interval membership with the interval widened by `margin`."""
        return self.lo - margin < d < self.hi + margin


@dataclass
class SeparationResult:
    """Split of one frame into background and per-detection parts.

    `parts` holds (detection, full-size depth image nonzero only inside the
    box). `part_intervals[i]` is None when part i had no valid pixels.
    """

    background: np.ndarray
    parts: list[tuple[Detection, np.ndarray]]
    part_intervals: list[DepthInterval | None]
    background_interval: DepthInterval | None


def filter_detections(raw, width: int, height: int,
                      threshold: float = DEFAULT_CONFIDENCE) -> list[Detection]:
    """Keep detections above the confidence threshold, clipped to the image.

    Boxes that fall entirely outside the image are dropped.
    """
    kept = []
    for det in raw:
        if det.confidence <= threshold:
            continue
        x_ul = max(0, det.x_ul)
        y_ul = max(0, det.y_ul)
        x_lr = min(width, det.x_lr)
        y_lr = min(height, det.y_lr)
        if x_ul >= x_lr or y_ul >= y_lr:
            continue
        kept.append(replace(det, x_ul=x_ul, y_ul=y_ul, x_lr=x_lr, y_lr=y_lr))
    return kept


def compute_histogram(values, bin_width: float = DEFAULT_BIN_WIDTH) -> DepthInterval:
    """Principal depth interval of a region.

    Bins are anchored at 0 with the given width. The interval is the maximal
    contiguous run of bins around the modal bin whose counts are at least half
    the modal count. Zeros (invalid pixels) are ignored.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size and v.min() >= 0.0:
        # depth images are non-negative: bin everything in one pass and
        # discount the invalid zeros from bin 0 afterwards
        invalid = int((v == 0.0).sum())
        if v.size == invalid:
            raise ValueError("region has no valid depth values")
        idx = v / bin_width
        np.floor(idx, out=idx)
        counts = np.bincount(idx.astype(np.int64, copy=False))
        counts[0] -= invalid
    else:
        v = v[v > 0]
        if v.size == 0:
            raise ValueError("region has no valid depth values")
        idx = v / bin_width
        np.floor(idx, out=idx)
        counts = np.bincount(idx.astype(np.int64, copy=False))
    mode = int(np.argmax(counts))
    half = counts[mode] / 2.0
    lo = mode
    while lo > 0 and counts[lo - 1] >= half:
        lo -= 1
    hi = mode
    while hi + 1 < len(counts) and counts[hi + 1] >= half:
        hi += 1
    return DepthInterval(lo * bin_width, (hi + 1) * bin_width)


def magnify_range(box: Detection, lam: float, width: int, height: int) -> Detection:
    """Scale a box about its center by `lam` per side, clipped to the image.

    Rounds outward so the result always contains the input box.
    """
    if lam < 1:
        raise ValueError("magnification factor must be >= 1")
    cx = (box.x_ul + box.x_lr) / 2.0
    cy = (box.y_ul + box.y_lr) / 2.0
    hw = box.width * lam / 2.0
    hh = box.height * lam / 2.0
    return Detection(
        x_ul=max(0, math.floor(cx - hw)),
        y_ul=max(0, math.floor(cy - hh)),
        x_lr=min(width, math.ceil(cx + hw)),
        y_lr=min(height, math.ceil(cy + hh)),
        confidence=box.confidence,
    )


def scene_separation(depth: np.ndarray, dets,
                     bin_width: float = DEFAULT_BIN_WIDTH) -> SeparationResult:
    """Split a depth frame into background and per-detection parts.

    A pixel covered by several boxes goes to the highest-confidence one,
    ties broken by lower detection index. The background interval is taken
    from the histogram of the whole input frame.
    """
    depth = np.asarray(depth)
    h, w = depth.shape
    dets = list(dets)

    # -1 = background, otherwise index of the owning detection
    owner = np.full((h, w), -1, dtype=np.int32)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    for i in order:
        d = dets[i]
        region = owner[d.y_ul:d.y_lr, d.x_ul:d.x_lr]
        region[region == -1] = i

    background = np.where(owner == -1, depth, 0).astype(depth.dtype, copy=False)
    parts = []
    intervals: list[DepthInterval | None] = []
    for i, d in enumerate(dets):
        part = np.zeros_like(depth)
        sl = (slice(d.y_ul, d.y_lr), slice(d.x_ul, d.x_lr))
        # a pixel can only belong to detection i inside its own box
        part[sl] = np.where(owner[sl] == i, depth[sl], 0)
        parts.append((d, part))
        valid = part[sl][part[sl] > 0]
        intervals.append(compute_histogram(valid, bin_width) if valid.size else None)

    bg_valid = depth[depth > 0]
    bg_interval = compute_histogram(bg_valid, bin_width) if bg_valid.size else None
    return SeparationResult(background, parts, intervals, bg_interval)


def filter_outliers(sep: SeparationResult, lam: float = DEFAULT_MAGNIFY,
                    bg_margin: float = DEFAULT_BG_MARGIN,
                    human_margin: float = DEFAULT_HUMAN_MARGIN) -> SeparationResult:
    """Remove residual outliers around each magnified detection box.

    Inside each magnified box, valid background pixels outside the widened
    background interval are invalidated; valid human pixels outside the
    widened part interval are handed back to the background. Boxes are
    processed in detection order; pixels outside every magnified box are
    untouched.
    """
    bg = sep.background.copy()
    h, w = bg.shape
    parts = [(det, img.copy()) for det, img in sep.parts]

    bgi = sep.background_interval
    for t, (det, part) in enumerate(parts):
        hi = sep.part_intervals[t]
        m = magnify_range(det, lam, w, h)
        sl = (slice(m.y_ul, m.y_lr), slice(m.x_ul, m.x_lr))
        b_reg = bg[sl]
        h_reg = part[sl]
        if bgi is not None:
            bad_b = (b_reg > 0) & ~((bgi.lo - bg_margin < b_reg)
                                    & (b_reg < bgi.hi + bg_margin))
            b_reg[bad_b] = 0
        if hi is not None:
            bad_h = (h_reg > 0) & ~((hi.lo - human_margin < h_reg)
                                    & (h_reg < hi.hi + human_margin))
            b_reg[bad_h] = h_reg[bad_h]
            h_reg[bad_h] = 0
    return SeparationResult(bg, parts, list(sep.part_intervals),
                            sep.background_interval)


def separate_and_filter(depth: np.ndarray, dets,
                        lam: float = DEFAULT_MAGNIFY,
                        bin_width: float = DEFAULT_BIN_WIDTH,
                        bg_margin: float = DEFAULT_BG_MARGIN,
                        human_margin: float = DEFAULT_HUMAN_MARGIN) -> SeparationResult:
    """One-call pipeline stage: separation followed by outlier filtering."""
    sep = scene_separation(depth, dets, bin_width)
    return filter_outliers(sep, lam, bg_margin, human_margin)
