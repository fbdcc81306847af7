"""Dataset and artifact file formats.

TUM-style depth sequences (16-bit PNG + index file), plain-text detection
and trajectory files, PLY point clouds, OBJ meshes, and key=value
configuration/metadata files. Readers reject malformed input rather than
repairing it; the only tolerated repair is renormalizing slightly non-unit
quaternions, which is logged.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .evaluation import Trajectory
from .geometry import Pose, quat_to_rot, rot_to_quat
from .mapping import PointCloud
from .placement import Mesh
from .separation import Detection

log = logging.getLogger(__name__)

DEFAULT_DEPTH_SCALE = 5000.0


class FileFormatError(Exception):
    """Malformed input file; carries path and line number where known."""

    def __init__(self, path, message, line: int | None = None):
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.line = line


@dataclass
class FrameBundle:
    timestamp: float
    depth: np.ndarray
    color: np.ndarray | None = None
    detections: list[Detection] = field(default_factory=list)


# ---------------------------------------------------------------- depth png

def write_depth_png(depth: np.ndarray, path, depth_scale: float = DEFAULT_DEPTH_SCALE):
    raw = np.clip(np.round(depth * depth_scale), 0, 65535).astype(np.uint16)
    Image.fromarray(raw).save(path)


def read_depth_png(path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    img = Image.open(path)
    raw = np.asarray(img, dtype=np.uint16)
    return raw.astype(np.float64) / depth_scale


# ------------------------------------------------------------- tum sequence

def read_metadata(path) -> dict[str, str]:
    """key=value file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FileFormatError(path, f"expected key=value, got {line!r}", ln)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_metadata(meta: dict, path):
    with open(path, "w") as f:
        for key, value in meta.items():
            f.write(f"{key}={value}\n")


def read_tum_sequence(dataset_dir, depth_scale: float | None = None):
    """Yield FrameBundles in timestamp order from a TUM-style directory.

    The directory must contain depth.txt listing `timestamp relative_path`
    per line. depth_scale falls back to metadata.txt, then to 5000.
    """
    dataset_dir = Path(dataset_dir)
    index = dataset_dir / "depth.txt"
    if not index.exists():
        raise FileFormatError(index, "depth index file not found")
    if depth_scale is None:
        meta_path = dataset_dir / "metadata.txt"
        if meta_path.exists():
            depth_scale = float(read_metadata(meta_path).get(
                "depth_scale", DEFAULT_DEPTH_SCALE))
        else:
            depth_scale = DEFAULT_DEPTH_SCALE

    prev_t = None
    with open(index) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FileFormatError(index, f"expected 'timestamp path', got {line!r}", ln)
            try:
                t = float(fields[0])
            except ValueError:
                raise FileFormatError(index, f"bad timestamp {fields[0]!r}", ln) from None
            if prev_t is not None and t <= prev_t:
                raise FileFormatError(index, "timestamps not strictly increasing", ln)
            prev_t = t
            png = dataset_dir / fields[1]
            if not png.exists():
                raise FileFormatError(index, f"depth image {fields[1]!r} missing", ln)
            yield FrameBundle(timestamp=t, depth=read_depth_png(png, depth_scale))


# --------------------------------------------------------------- detections

def write_detections(records, path):
    """records: iterable of (timestamp, list[Detection])."""
    with open(path, "w") as f:
        for t, dets in records:
            for d in dets:
                f.write(f"{t:.6f} {d.x_ul} {d.y_ul} {d.x_lr} {d.y_lr} "
                        f"{d.confidence:.6f}\n")


def read_detections(path) -> list[tuple[float, list[Detection]]]:
    """Parse `timestamp x_ul y_ul x_lr y_lr confidence` records.

    Returns (timestamp, detections) groups in file order; record order within
    a timestamp is preserved.
    """
    groups: list[tuple[float, list[Detection]]] = []
    index: dict[float, int] = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise FileFormatError(path, f"expected 6 fields, got {len(fields)}", ln)
            try:
                t = float(fields[0])
                coords = [int(round(float(x))) for x in fields[1:5]]
                conf = float(fields[5])
            except ValueError:
                raise FileFormatError(path, f"malformed record {line!r}", ln) from None
            if coords[0] >= coords[2] or coords[1] >= coords[3]:
                raise FileFormatError(path, f"degenerate box in {line!r}", ln)
            det = Detection(*coords, confidence=conf)
            if t not in index:
                index[t] = len(groups)
                groups.append((t, []))
            groups[index[t]][1].append(det)
    return groups


def detections_near(groups, timestamp: float, max_dt: float = 0.02) -> list[Detection]:
    """Detections of the group whose timestamp is nearest, within max_dt."""
    best = None
    for t, dets in groups:
        dt = abs(t - timestamp)
        if dt <= max_dt and (best is None or dt < best[0]):
            best = (dt, dets)
    return best[1] if best else []


# ------------------------------------------------------------- trajectories

def write_trajectory(traj: Trajectory, path):
    """TUM format: `timestamp tx ty tz qx qy qz qw` per line."""
    with open(path, "w") as f:
        for t, pose in zip(traj.times, traj.poses):
            tx, ty, tz = pose.translation
            qx, qy, qz, qw = rot_to_quat(pose.rotation)
            f.write(f"{t:.6f} {tx:.9f} {ty:.9f} {tz:.9f} "
                    f"{qx:.9f} {qy:.9f} {qz:.9f} {qw:.9f}\n")


def read_trajectory(path) -> Trajectory:
    times, poses = [], []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 8:
                raise FileFormatError(path, f"expected 8 fields, got {len(fields)}", ln)
            try:
                vals = [float(x) for x in fields]
            except ValueError:
                raise FileFormatError(path, f"malformed line {line!r}", ln) from None
            t, tx, ty, tz, qx, qy, qz, qw = vals
            norm = np.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
            if abs(norm - 1.0) > 1e-3:
                raise FileFormatError(path, f"non-unit quaternion (norm {norm:.6f})", ln)
            if abs(norm - 1.0) > 1e-9:
                log.debug("renormalizing quaternion at %s:%d", path, ln)
            times.append(t)
            poses.append(Pose(quat_to_rot(qx, qy, qz, qw), np.array([tx, ty, tz])))
    try:
        return Trajectory(np.array(times), poses)
    except ValueError as e:
        raise FileFormatError(path, str(e)) from None


# ------------------------------------------------------------ track points

def write_track(points, path):
    """points: iterable of (timestamp, world 3-vector)."""
    with open(path, "w") as f:
        for t, p in points:
            f.write(f"{t:.6f} {p[0]:.9f} {p[1]:.9f} {p[2]:.9f}\n")


def read_track(path) -> list[tuple[float, np.ndarray]]:
    out = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise FileFormatError(path, f"expected 4 fields, got {len(fields)}", ln)
            try:
                vals = [float(x) for x in fields]
            except ValueError:
                raise FileFormatError(path, f"malformed line {line!r}", ln) from None
            out.append((vals[0], np.array(vals[1:])))
    return out


# --------------------------------------------------------------------- ply

def write_ply(cloud: PointCloud, path):
    """Binary little-endian PLY with float32 xyz and optional uchar rgb."""
    has_color = cloud.colors is not None
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {len(cloud)}",
              "property float x", "property float y", "property float z"]
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        xyz = cloud.points.astype("<f4")
        if has_color:
            for p, c in zip(xyz, cloud.colors):
                f.write(p.tobytes() + c.astype(np.uint8).tobytes())
        else:
            f.write(xyz.tobytes())


def read_ply(path) -> PointCloud:
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise FileFormatError(path, "not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    count = None
    props = []
    for line in header:
        fields = line.split()
        if fields[:2] == ["element", "vertex"]:
            count = int(fields[2])
        elif fields and fields[0] == "property" and count is not None:
            props.append((fields[1], fields[2]))
        elif fields[:1] == ["format"] and fields[1] != "binary_little_endian":
            raise FileFormatError(path, f"unsupported format {fields[1]!r}")
    if count is None:
        raise FileFormatError(path, "missing vertex element")
    names = [name for _, name in props]
    if names[:3] != ["x", "y", "z"]:
        raise FileFormatError(path, "expected x y z properties first")
    has_color = names[3:6] == ["red", "green", "blue"]
    rec = struct.calcsize("<3f") + (3 if has_color else 0)
    if len(body) < count * rec:
        raise FileFormatError(path, "truncated vertex data")
    pts = np.zeros((count, 3))
    cols = np.zeros((count, 3), dtype=np.uint8) if has_color else None
    for i in range(count):
        off = i * rec
        pts[i] = struct.unpack_from("<3f", body, off)
        if has_color:
            cols[i] = struct.unpack_from("<3B", body, off + 12)
    return PointCloud(pts, cols)


# --------------------------------------------------------------------- obj

def write_obj(mesh: Mesh, path):
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
        for a, b, c in mesh.faces:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def read_obj(path) -> Mesh:
    """OBJ subset: `v x y z` and triangular `f i j k` records only."""
    verts, faces = [], []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if fields[0] == "v":
                if len(fields) != 4:
                    raise FileFormatError(path, "vertex needs 3 coordinates", ln)
                try:
                    verts.append([float(x) for x in fields[1:]])
                except ValueError:
                    raise FileFormatError(path, f"malformed vertex {line!r}", ln) from None
            elif fields[0] == "f":
                if len(fields) != 4:
                    raise FileFormatError(path, "only triangular faces supported", ln)
                try:
                    idx = [int(x.split("/")[0]) - 1 for x in fields[1:]]
                except ValueError:
                    raise FileFormatError(path, f"malformed face {line!r}", ln) from None
                faces.append(idx)
            else:
                # ignore other record types (vn, vt, o, g, usemtl ...)
                continue
    try:
        return Mesh(np.array(verts).reshape(-1, 3),
                    np.array(faces, dtype=np.int64).reshape(-1, 3))
    except ValueError as e:
        raise FileFormatError(path, str(e)) from None
