"""Pipeline configuration: defaults, key=value files, flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from . import fileio
from .odometry import OdometryConfig
from .tracking import AssociationConfig


@dataclass(frozen=True)
class PipelineConfig:
    # outlier filter
    magnify: float = 1.2
    bin_width: float = 0.2
    bg_margin: float = 0.1
    human_margin: float = 0.2
    confidence: float = 0.5
    # tracking
    gate: float = 0.8
    max_misses: int = 15
    # odometry
    pyramid_levels: int = 3
    max_iterations: int = 10
    convergence_eps: float = 1e-5
    huber_delta: float = 0.05
    normal_discontinuity: float = 0.3
    source_stride: int = 0  # 0 = pick from image width (~160 samples across)
    min_valid_pixels: int = 1000
    # mapping / io
    voxel: float = 0.05
    fuse_stride: int = 4
    depth_scale: float = 5000.0

    def __post_init__(self):
        if self.magnify < 1:
            raise ValueError("magnify must be >= 1")
        for name in ("bin_width", "gate", "voxel", "depth_scale",
                     "bg_margin", "human_margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def odometry(self, width: int = 640) -> OdometryConfig:
        stride = self.source_stride or max(1, round(width / 160))
        return OdometryConfig(
            pyramid_levels=self.pyramid_levels,
            max_iterations=self.max_iterations,
            convergence_eps=self.convergence_eps,
            huber_delta=self.huber_delta,
            normal_discontinuity=self.normal_discontinuity,
            source_stride=stride,
            min_valid_pixels=self.min_valid_pixels,
        )

    def association(self) -> AssociationConfig:
        return AssociationConfig(gate=self.gate, max_misses=self.max_misses)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, value: str):
    kind = _FIELD_TYPES[name]
    return int(value) if kind == "int" else float(value)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional key=value file, then overrides."""
    values: dict = {}
    if path is not None:
        for key, raw in fileio.read_metadata(path).items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown configuration key {key!r}")
            values[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown configuration key {key!r}")
        values[key] = _coerce(key, str(raw))
    return replace(PipelineConfig(), **values)
