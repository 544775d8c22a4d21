"""Ground / non-ground separation via per-sector RANSAC plane fits.

The scene is divided into concentric zones around the sensor trajectory,
each zone into azimuth sectors. In every sector, plane hypotheses are
sampled from low-height seed points; the hypothesis with the most seed
inliers is refined by a least-squares fit and accepted if its tilt from
horizontal stays within bounds. Points within the inlier distance of
their sector's accepted plane are ground. Sectors without an acceptable
plane, and points beyond the outermost zone, stay non-ground.
"""

from dataclasses import dataclass, field

import numpy as np

from .accumulate import Scene
from .errors import ConfigError


@dataclass
class GroundParams:
    zone_edges: tuple = (15.0, 30.0, 50.0, 80.0)
    sectors_per_zone: int = 16
    ransac_iterations: int = 100
    inlier_distance: float = 0.2  # meters
    max_tilt_deg: float = 25.0
    seed_height_band: float = 0.5  # meters above the per-sector lowest point

    def __post_init__(self):
        if len(self.zone_edges) < 1 or any(
            b <= a for a, b in zip(self.zone_edges, self.zone_edges[1:])
        ):
            raise ConfigError("zone edges must be strictly increasing")
        if self.sectors_per_zone < 1 or self.ransac_iterations < 1:
            raise ConfigError("sectors and RANSAC iterations must be positive")
        if self.inlier_distance <= 0 or self.seed_height_band <= 0:
            raise ConfigError("distances must be positive")


def _fit_plane_lsq(points: np.ndarray) -> np.ndarray | None:
    """Least-squares plane through points; returns (nx, ny, nz, d) with |n|=1."""
    c = points.mean(axis=0, dtype=np.float64)
    centered = points.astype(np.float64) - c
    # smallest principal direction of the covariance is the plane normal
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= 1e-12:  # collinear seeds: no unique plane
        return None
    normal = vt[2]
    if normal[2] < 0:
        normal = -normal
    return np.array([normal[0], normal[1], normal[2], -normal @ c])


def segment_ground(
    scene: Scene,
    params: GroundParams | None = None,
    rng: np.random.Generator | None = None,
    origin: np.ndarray | None = None,
) -> np.ndarray:
    """Boolean per-point ground mask for an accumulated scene.

    ``origin`` anchors the zone/sector grid; it defaults to the centroid
    of the scene's xy extent. Deterministic for a fixed ``rng`` state.
    """
    params = params or GroundParams()
    rng = rng or np.random.default_rng(0)
    pts = scene.points.astype(np.float64)
    n = len(pts)
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask

    if origin is None:
        origin = 0.5 * (pts[:, :2].min(axis=0) + pts[:, :2].max(axis=0))
    rel = pts[:, :2] - np.asarray(origin, dtype=np.float64)
    radius = np.hypot(rel[:, 0], rel[:, 1])
    azimuth = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)

    edges = np.array([0.0, *params.zone_edges])
    zone = np.searchsorted(edges, radius, side="right") - 1
    zone[radius >= edges[-1]] = -1  # beyond the outermost zone: never ground
    sector = np.minimum(
        (azimuth / (2.0 * np.pi) * params.sectors_per_zone).astype(np.intp),
        params.sectors_per_zone - 1,
    )

    cos_tilt_min = np.cos(np.deg2rad(params.max_tilt_deg))
    for z in range(len(params.zone_edges)):
        for s in range(params.sectors_per_zone):
            sel = np.flatnonzero((zone == z) & (sector == s))
            if sel.size < 3:
                continue
            sector_pts = pts[sel]
            z_min = sector_pts[:, 2].min()
            seeds = sector_pts[sector_pts[:, 2] <= z_min + params.seed_height_band]
            if len(seeds) < 3:
                continue
            plane = _ransac_plane(seeds, params, rng)
            if plane is None:
                continue
            if plane[2] < cos_tilt_min:  # nz of a unit normal = cos(tilt)
                continue
            dist = np.abs(sector_pts @ plane[:3] + plane[3])
            mask[sel[dist <= params.inlier_distance]] = True
    return mask


def _ransac_plane(seeds: np.ndarray, params: GroundParams, rng: np.random.Generator):
    """Best plane by seed-inlier count, refined on its inliers."""
    m = len(seeds)
    iters = params.ransac_iterations
    tri = rng.integers(0, m, size=(iters, 3))
    a, b, c = seeds[tri[:, 0]], seeds[tri[:, 1]], seeds[tri[:, 2]]
    normals = np.cross(b - a, c - a)
    norms = np.linalg.norm(normals, axis=1)
    ok = norms > 1e-12
    if not ok.any():
        return None
    normals = normals[ok] / norms[ok, None]
    anchors = a[ok]
    # distances of every seed to every hypothesis plane
    dist = np.abs((seeds @ normals.T) - np.einsum("ij,ij->i", anchors, normals))
    counts = (dist <= params.inlier_distance).sum(axis=0)
    best = int(np.argmax(counts))  # ties: first (lowest iteration index)
    if counts[best] < 3:
        return None
    inliers = seeds[dist[:, best] <= params.inlier_distance]
    plane = _fit_plane_lsq(inliers)
    if plane is None:
        n0 = normals[best]
        if n0[2] < 0:
            n0 = -n0
        plane = np.array([n0[0], n0[1], n0[2], -n0 @ anchors[best]])
    return plane
