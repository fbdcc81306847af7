"""Dynamic-scene RGB-D pipeline toolkit.

Separates moving humans from the static background of depth frames,
estimates camera motion on the filtered background, tracks per-human 3D
trajectories, places recovered human meshes in the world frame, fuses a
static point-cloud map, and evaluates trajectory accuracy against ground
truth. A synthetic scene generator provides the ground-truth oracle.
"""

from .config import PipelineConfig
from .geometry import Intrinsics, Pose
from .separation import Detection, DepthInterval, SeparationResult

__all__ = [
    "Detection",
    "DepthInterval",
    "Intrinsics",
    "PipelineConfig",
    "Pose",
    "SeparationResult",
]

__version__ = "0.1.0"
