"""Point-to-image projection and primal label generation.

Each point is projected into every camera of the rig; the label of the
target pixel in the camera with the smallest camera-frame depth wins
(ties go to the lowest camera index). Points seen by no camera receive
the void label. Labels are copied with nearest-pixel (floor) sampling;
no occlusion reasoning is performed here.
"""

import numpy as np

from .core import NO_INSTANCE, VOID_ID, CameraModel
from .errors import ConfigError
from .io import LabelImage, PanopticLabels, PointCloud

Z_MIN = 0.1  # meters; guards against blowup near the image plane


def project_point(cam: CameraModel, point) -> tuple | None:
    """Project one sensor-frame point; returns ``(u, v, depth)`` or None.

    u, v are integer pixel coordinates (floor of the continuous image
    position); depth is the camera-frame z in meters.
    """
    p = cam.extrinsic.apply(np.asarray(point, dtype=np.float64))
    z = p[2]
    if z <= Z_MIN:
        return None
    u = cam.fx * p[0] / z + cam.cx
    v = cam.fy * p[1] / z + cam.cy
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        return None
    return int(np.floor(u)), int(np.floor(v)), float(z)


def _project_all(cam: CameraModel, points: np.ndarray):
    """Vectorized projection; returns (valid mask, u, v, depth)."""
    p = cam.extrinsic.apply(points)
    z = p[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * p[:, 0] / z + cam.cx
        v = cam.fy * p[:, 1] / z + cam.cy
    valid = (z > Z_MIN) & (u >= 0.0) & (u < cam.width) & (v >= 0.0) & (v < cam.height)
    return valid, u, v, z


def label_points(cloud: PointCloud, cams: list, images: list) -> PanopticLabels:
    """Copy 2D panoptic labels onto the points of one scan."""
    if len(cams) != len(images):
        raise ConfigError(
            f"{len(cams)} cameras but {len(images)} label images"
        )
    if not cams:
        raise ConfigError("at least one camera is required")
    for j, (cam, img) in enumerate(zip(cams, images)):
        if img.width != cam.width or img.height != cam.height:
            raise ConfigError(f"camera {j}: image size differs from calibration")

    n = len(cloud)
    semantic = np.full(n, VOID_ID, dtype=np.uint16)
    instance = np.full(n, NO_INSTANCE, dtype=np.uint16)
    best_depth = np.full(n, np.inf)
    for cam, img in zip(cams, images):
        valid, u, v, z = _project_all(cam, cloud.points)
        # strict < keeps the lowest camera index on equal depths
        take = valid & (z < best_depth)
        if not take.any():
            continue
        ui = np.floor(u[take]).astype(np.intp)
        vi = np.floor(v[take]).astype(np.intp)
        semantic[take] = img.semantic[vi, ui]
        instance[take] = img.instance[vi, ui]
        best_depth[take] = z[take]
    # void pixels never carry an instance
    instance[semantic == VOID_ID] = NO_INSTANCE
    return PanopticLabels(semantic, instance)
