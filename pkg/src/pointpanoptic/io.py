"""Dataset ingestion and bit-exact persistence.

On-disk formats (all multi-byte values little-endian):

* point cloud: raw binary, 5 float32 per point (x, y, z, intensity, ring)
* label image: 16-bit single-channel PNG, pixel = semantic * 1000 + instance
* point labels: raw binary, uint32 per point, packed the same way
* calibration: text, one camera per line:
  ``fx fy cx cy width height r11 r12 r13 tx r21 r22 r23 ty r31 r32 r33 tz``
* poses: text, one scan per line, 12 reals row-major ``[R | t]``
"""

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import (
    INSTANCE_MODULUS,
    NO_INSTANCE,
    ORTHO_TOL,
    READER_ORTHO_TOL,
    UNKNOWN_INSTANCE,
    VOID_ID,
    CameraModel,
    ClassTable,
    RigidTransform,
    orthonormality_defect,
    orthonormalize,
    pack_labels,
    unpack_labels,
)
from .errors import FormatError, IoError, LengthMismatch, SerializationError

POINT_RECORD_FLOATS = 5
POINT_RECORD_BYTES = POINT_RECORD_FLOATS * 4


@dataclass
class PointCloud:
    """A single LiDAR scan in its own sensor frame."""

    points: np.ndarray  # (n, 3) float32
    intensity: np.ndarray | None = None  # (n,) float32 in [0, 1]
    ring: np.ndarray | None = None  # (n,) uint8
    scan_id: str = ""
    timestamp_us: int = 0

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float32)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise FormatError(f"points must be (n, 3), got {self.points.shape}")
        n = len(self.points)
        if n == 0:
            raise FormatError("point cloud is empty")
        if not np.isfinite(self.points).all():
            raise FormatError("point cloud contains non-finite coordinates")
        if self.intensity is not None:
            self.intensity = np.ascontiguousarray(self.intensity, dtype=np.float32)
            if self.intensity.shape != (n,):
                raise LengthMismatch("intensity length differs from point count")
            if not np.isfinite(self.intensity).all():
                raise FormatError("intensity contains non-finite values")
            if self.intensity.min() < 0.0 or self.intensity.max() > 1.0:
                raise FormatError("intensity must lie in [0, 1]")
        if self.ring is not None:
            self.ring = np.ascontiguousarray(self.ring, dtype=np.uint8)
            if self.ring.shape != (n,):
                raise LengthMismatch("ring length differs from point count")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class PanopticLabels:
    """Per-point (semantic, instance) pairs parallel to one point cloud."""

    semantic: np.ndarray  # (n,) uint16
    instance: np.ndarray  # (n,) uint16

    def __post_init__(self):
        self.semantic = np.ascontiguousarray(self.semantic, dtype=np.uint16)
        self.instance = np.ascontiguousarray(self.instance, dtype=np.uint16)
        if self.semantic.shape != self.instance.shape or self.semantic.ndim != 1:
            raise LengthMismatch("semantic and instance arrays must be parallel 1-d")

    def __len__(self) -> int:
        return len(self.semantic)

    def copy(self) -> "PanopticLabels":
        return PanopticLabels(self.semantic.copy(), self.instance.copy())

    def validate_against(self, table: ClassTable):
        if len(self.semantic) and self.semantic.max() >= table.num_classes:
            raise FormatError("semantic id exceeds class table")
        stuff = ~table.thing_mask()[self.semantic]
        if np.any(self.instance[stuff] != NO_INSTANCE):
            raise FormatError("stuff/void points must carry instance 0")


@dataclass
class LabelImage:
    """Per-pixel panoptic annotation for one camera image."""

    semantic: np.ndarray  # (h, w) uint16
    instance: np.ndarray  # (h, w) uint16

    def __post_init__(self):
        self.semantic = np.ascontiguousarray(self.semantic, dtype=np.uint16)
        self.instance = np.ascontiguousarray(self.instance, dtype=np.uint16)
        if self.semantic.shape != self.instance.shape or self.semantic.ndim != 2:
            raise FormatError("semantic and instance rasters must be parallel 2-d")

    @property
    def height(self) -> int:
        return self.semantic.shape[0]

    @property
    def width(self) -> int:
        return self.semantic.shape[1]


def read_point_cloud(path, scan_id: str = "", timestamp_us: int = 0) -> PointCloud:
    """Read a binary scan file (5 float32 LE per point)."""
    try:
        raw = np.fromfile(path, dtype="<f4")
    except (OSError, IOError) as exc:
        raise IoError(f"cannot read point cloud {path}: {exc}") from exc
    if raw.size == 0:
        raise FormatError(f"{path}: empty point cloud file")
    if raw.size % POINT_RECORD_FLOATS != 0:
        raise FormatError(
            f"{path}: size {raw.size * 4} bytes is not a multiple of {POINT_RECORD_BYTES}"
        )
    rec = raw.reshape(-1, POINT_RECORD_FLOATS)
    if not np.isfinite(rec).all():
        raise FormatError(f"{path}: non-finite values in point records")
    ring = rec[:, 4]
    if ring.min() < 0 or ring.max() > 255 or np.any(ring != np.floor(ring)):
        raise FormatError(f"{path}: ring column must hold integers in [0, 255]")
    return PointCloud(
        points=rec[:, :3],
        intensity=rec[:, 3],
        ring=ring.astype(np.uint8),
        scan_id=scan_id or os.path.splitext(os.path.basename(str(path)))[0],
        timestamp_us=timestamp_us,
    )


def write_point_cloud(cloud: PointCloud, path):
    rec = np.empty((len(cloud), POINT_RECORD_FLOATS), dtype="<f4")
    rec[:, :3] = cloud.points
    rec[:, 3] = cloud.intensity if cloud.intensity is not None else 0.0
    rec[:, 4] = cloud.ring if cloud.ring is not None else 0
    rec.tofile(path)


def read_label_image(path, table: ClassTable | None = None) -> LabelImage:
    """Read a 16-bit single-channel PNG of packed panoptic labels."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("I;16", "I;16B", "I"):
                raise FormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode}")
            arr = np.asarray(img, dtype=np.uint32)
    except FileNotFoundError as exc:
        raise IoError(f"cannot read label image {path}: {exc}") from exc
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: not a decodable PNG ({exc})") from exc
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected single channel, got shape {arr.shape}")
    if arr.max(initial=0) > np.iinfo(np.uint16).max:
        raise FormatError(f"{path}: pixel values exceed 16-bit range")
    semantic, instance = unpack_labels(arr)
    img_labels = LabelImage(semantic.astype(np.uint16), instance.astype(np.uint16))
    if table is not None:
        if img_labels.semantic.max(initial=0) >= table.num_classes:
            raise FormatError(f"{path}: semantic id exceeds class table")
        stuff = ~table.thing_mask()[img_labels.semantic]
        if np.any(img_labels.instance[stuff] != NO_INSTANCE):
            raise FormatError(f"{path}: stuff pixels must carry instance 0")
    return img_labels


def write_label_image(image: LabelImage, path):
    packed = pack_labels(image.semantic, image.instance)
    if packed.max(initial=0) > np.iinfo(np.uint16).max:
        raise SerializationError("packed pixel value exceeds 16-bit range")
    pil = Image.fromarray(packed.astype(np.uint16), mode="I;16")
    pil.save(path, format="PNG")


def _parse_rows(path, kind: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read {kind} file {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line or line.startswith("#"):
            continue
        try:
            rows.append(([float(tok) for tok in line.split()], lineno))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric token ({exc})") from exc
    return rows


def _rotation_from_row(vals, where: str) -> RigidTransform:
    m = np.array(vals, dtype=np.float64).reshape(3, 4)
    r, t = m[:, :3], m[:, 3]
    defect = orthonormality_defect(r)
    if defect > READER_ORTHO_TOL:
        raise FormatError(f"{where}: rotation not orthonormal (defect {defect:.2e})")
    if np.linalg.det(r) < 0:
        raise FormatError(f"{where}: rotation is a reflection (det < 0)")
    if defect > ORTHO_TOL:
        r = orthonormalize(r)
    return RigidTransform(r, t)


def read_poses(path) -> list:
    """Read per-scan poses, one ``[R | t]`` row-major line each."""
    poses = []
    for vals, lineno in _parse_rows(path, "pose"):
        if len(vals) != 12:
            raise FormatError(f"{path}:{lineno}: pose line needs 12 values, got {len(vals)}")
        poses.append(_rotation_from_row(vals, f"{path}:{lineno}"))
    if not poses:
        raise FormatError(f"{path}: no poses found")
    return poses


def write_poses(poses, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in poses:
            m = np.hstack([p.rotation, p.translation.reshape(3, 1)])
            fh.write(" ".join(f"{v:.12g}" for v in m.reshape(-1)) + "\n")


def read_calibration(path) -> list:
    """Read camera models, one 18-value line per camera."""
    cams = []
    for vals, lineno in _parse_rows(path, "calibration"):
        if len(vals) != 18:
            raise FormatError(
                f"{path}:{lineno}: camera line needs 18 values, got {len(vals)}"
            )
        fx, fy, cx, cy, width, height = vals[:6]
        if width != int(width) or height != int(height):
            raise FormatError(f"{path}:{lineno}: image dimensions must be integers")
        extrinsic = _rotation_from_row(vals[6:], f"{path}:{lineno}")
        try:
            cams.append(
                CameraModel(fx, fy, cx, cy, int(width), int(height), extrinsic)
            )
        except Exception as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not cams:
        raise FormatError(f"{path}: no cameras found")
    return cams


def write_calibration(cams, path):
    with open(path, "w", encoding="utf-8") as fh:
        for c in cams:
            m = np.hstack([c.extrinsic.rotation, c.extrinsic.translation.reshape(3, 1)])
            head = f"{c.fx:.12g} {c.fy:.12g} {c.cx:.12g} {c.cy:.12g} {c.width} {c.height}"
            fh.write(head + " " + " ".join(f"{v:.12g}" for v in m.reshape(-1)) + "\n")


def read_labels(path) -> PanopticLabels:
    """Read packed uint32 LE point labels."""
    try:
        packed = np.fromfile(path, dtype="<u4")
    except (OSError, IOError) as exc:
        raise IoError(f"cannot read labels {path}: {exc}") from exc
    if packed.size == 0:
        raise FormatError(f"{path}: empty label file")
    semantic, instance = unpack_labels(packed)
    return PanopticLabels(semantic, instance)


def write_labels(labels: PanopticLabels, path):
    if np.any(labels.instance == UNKNOWN_INSTANCE):
        raise SerializationError("labels contain the internal UNKNOWN instance sentinel")
    if np.any(labels.instance >= INSTANCE_MODULUS):
        raise SerializationError(
            f"instance ids must be < {INSTANCE_MODULUS} for packed serialization"
        )
    pack_labels(labels.semantic, labels.instance).astype("<u4").tofile(path)


def read_scene_groups(path) -> list:
    """Read optional scene grouping: one line per scene listing scan ids."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read scene file {path}: {exc}") from exc
    groups = [ln.split() for ln in lines if ln and not ln.startswith("#")]
    if not groups:
        raise FormatError(f"{path}: no scene groups found")
    return groups


def write_scene_groups(groups, path):
    with open(path, "w", encoding="utf-8") as fh:
        for g in groups:
            fh.write(" ".join(g) + "\n")
