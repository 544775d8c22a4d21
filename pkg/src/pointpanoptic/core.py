"""Geometric and label primitives shared by all pipeline stages.

Conventions used throughout the package:

* Points are stored as float32 ``(n, 3)`` arrays in meters; geometric
  kernels accumulate in float64.
* Semantic class ids are uint16 with ``0`` reserved for the void class.
* Instance ids are uint16 with ``0`` meaning "no instance" (stuff/void)
  and ``0xFFFF`` an internal-only sentinel for an invalidated id.
* A panoptic label packs into uint32 as ``semantic * 1000 + instance``,
  so instance ids must stay in ``[0, 999]`` per scan.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

VOID_ID = 0
NO_INSTANCE = 0
UNKNOWN_INSTANCE = 0xFFFF
INSTANCE_MODULUS = 1000

# rotation matrices are accepted up to this orthonormality defect and
# silently re-orthonormalized; beyond READER_ORTHO_TOL readers reject
ORTHO_TOL = 1e-5
READER_ORTHO_TOL = 1e-3


def _as_matrix3(value) -> np.ndarray:
    m = np.asarray(value, dtype=np.float64)
    if m.shape != (3, 3):
        raise ConfigError(f"rotation must be 3x3, got shape {m.shape}")
    return m


def orthonormality_defect(rotation: np.ndarray) -> float:
    """Max-norm of R^T R - I."""
    return float(np.abs(rotation.T @ rotation - np.eye(3)).max())


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) via SVD, keeping det = +1."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation mapping points between frames.

    ``apply(p) = rotation @ p + translation``. Immutable; validated at
    construction (orthonormal rotation, det +1, finite translation).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _as_matrix3(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if t.shape != (3,):
            raise ConfigError(f"translation must be a 3-vector, got {t.shape}")
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ConfigError("transform contains non-finite values")
        defect = orthonormality_defect(r)
        if defect > ORTHO_TOL:
            raise ConfigError(f"rotation not orthonormal (defect {defect:.2e})")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise ConfigError("rotation determinant differs from +1")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_parts(rotation, translation) -> "RigidTransform":
        """Build from a possibly slightly non-orthonormal rotation."""
        r = _as_matrix3(rotation)
        if orthonormality_defect(r) > ORTHO_TOL:
            r = orthonormalize(r)
        return RigidTransform(r, translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack (n, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        r = self.rotation @ other.rotation
        t = self.rotation @ other.translation + self.translation
        # numeric drift accumulates over long pose chains
        if orthonormality_defect(r) > 1e-4:
            r = orthonormalize(r)
        return RigidTransform(r, t)

    def inverse(self) -> "RigidTransform":
        r = self.rotation.T
        return RigidTransform(r, -(r @ self.translation))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def apply(t: RigidTransform, points: np.ndarray) -> np.ndarray:
    return t.apply(points)


def inverse(t: RigidTransform) -> RigidTransform:
    return t.inverse()


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraModel:
    """Ideal pinhole camera; ``extrinsic`` maps sensor frame -> camera frame.

    The camera looks along +z of its own frame; u grows with +x, v with +y.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: RigidTransform

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("image dimensions must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ConfigError("principal point must lie strictly inside the image")


@dataclass(frozen=True)
class ClassTable:
    """Names plus thing/stuff and rare flags for every semantic class.

    Index 0 is always the void class (neither thing nor stuff, never rare).
    """

    names: tuple
    thing: tuple  # bool per class; void entry must be False
    rare: tuple  # bool per class

    def __post_init__(self):
        n = len(self.names)
        if len(self.thing) != n or len(self.rare) != n:
            raise ConfigError("class table columns must have equal length")
        if n < 3:
            raise ConfigError("need void plus at least one thing and one stuff class")
        if self.thing[VOID_ID] or self.rare[VOID_ID]:
            raise ConfigError("void class cannot be a thing or rare class")
        things = [i for i in range(1, n) if self.thing[i]]
        stuffs = [i for i in range(1, n) if not self.thing[i]]
        if not things or not stuffs:
            raise ConfigError("need at least one thing and one stuff class")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "thing", tuple(bool(b) for b in self.thing))
        object.__setattr__(self, "rare", tuple(bool(b) for b in self.rare))

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def thing_ids(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.thing))

    def stuff_ids(self) -> np.ndarray:
        """All non-void, non-thing class ids."""
        mask = ~np.array(self.thing)
        mask[VOID_ID] = False
        return np.flatnonzero(mask)

    def rare_ids(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.rare))

    def thing_mask(self) -> np.ndarray:
        return np.array(self.thing, dtype=bool)

    @staticmethod
    def from_dict(spec: dict) -> "ClassTable":
        """Build from ``{"classes": [{"name", "thing", "rare"}, ...]}``.

        The void class may be omitted; it is prepended automatically.
        """
        rows = spec["classes"] if isinstance(spec, dict) else spec
        names, thing, rare = [], [], []
        for row in rows:
            names.append(row["name"])
            thing.append(bool(row.get("thing", False)))
            rare.append(bool(row.get("rare", False)))
        if not names or names[0] != "void":
            names.insert(0, "void")
            thing.insert(0, False)
            rare.insert(0, False)
        return ClassTable(tuple(names), tuple(thing), tuple(rare))

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"name": n, "thing": t, "rare": r}
                for n, t, r in zip(self.names, self.thing, self.rare)
            ]
        }


def pack_labels(semantic: np.ndarray, instance: np.ndarray) -> np.ndarray:
    """Pack parallel semantic/instance arrays into uint32 values."""
    return semantic.astype(np.uint32) * INSTANCE_MODULUS + instance.astype(np.uint32)


def unpack_labels(packed: np.ndarray):
    """Inverse of :func:`pack_labels`."""
    packed = packed.astype(np.uint32)
    semantic = (packed // INSTANCE_MODULUS).astype(np.uint16)
    instance = (packed % INSTANCE_MODULUS).astype(np.uint16)
    return semantic, instance
