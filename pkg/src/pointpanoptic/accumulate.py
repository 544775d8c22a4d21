"""Scene accumulation across contiguous scans and per-scan splitting.

A scene concatenates posed scans into one world-frame cloud while
remembering which scan each point came from, so refined labels can be
split back into per-scan arrays afterwards. Also provides a minimal
point-to-point ICP used when pose files are absent.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import RigidTransform
from .errors import ConfigError, DegenerateGeometry, LengthMismatch
from .io import PanopticLabels, PointCloud


@dataclass
class Scene:
    """Accumulated cloud with provenance and an optional ground mask."""

    points: np.ndarray  # (n, 3) float32, world frame
    scan_index: np.ndarray  # (n,) uint16
    source_index: np.ndarray  # (n,) uint32, index within the source scan
    labels: PanopticLabels
    scan_sizes: np.ndarray  # points per source scan, in scan order
    ground_mask: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.points)
        if not (
            len(self.scan_index) == len(self.source_index) == len(self.labels) == n
        ):
            raise LengthMismatch("scene arrays must be parallel")
        if self.scan_index.max(initial=0) >= len(self.scan_sizes):
            raise LengthMismatch("scan_index exceeds scan count")

    def __len__(self) -> int:
        return len(self.points)


def accumulate(scans: list, labels: list, poses: list) -> Scene:
    """Transform each scan by its pose and concatenate in scan order."""
    if not scans:
        raise ConfigError("cannot accumulate zero scans")
    if not (len(scans) == len(labels) == len(poses)):
        raise ConfigError(
            f"scans/labels/poses lengths differ: {len(scans)}/{len(labels)}/{len(poses)}"
        )
    pts, scan_idx, src_idx, sem, inst = [], [], [], [], []
    for i, (scan, lab, pose) in enumerate(zip(scans, labels, poses)):
        if len(scan) != len(lab):
            raise ConfigError(f"scan {i}: {len(scan)} points but {len(lab)} labels")
        pts.append(pose.apply(scan.points).astype(np.float32))
        scan_idx.append(np.full(len(scan), i, dtype=np.uint16))
        src_idx.append(np.arange(len(scan), dtype=np.uint32))
        sem.append(lab.semantic)
        inst.append(lab.instance)
    return Scene(
        points=np.concatenate(pts),
        scan_index=np.concatenate(scan_idx),
        source_index=np.concatenate(src_idx),
        labels=PanopticLabels(np.concatenate(sem), np.concatenate(inst)),
        scan_sizes=np.array([len(s) for s in scans], dtype=np.int64),
    )


def split_scene(scene: Scene, refined: PanopticLabels) -> list:
    """Split scene-parallel labels back into per-scan label arrays."""
    if len(refined) != len(scene):
        raise ConfigError(
            f"refined labels ({len(refined)}) not parallel to scene ({len(scene)})"
        )
    out = []
    for i, size in enumerate(scene.scan_sizes):
        mask = scene.scan_index == i
        sem = np.empty(size, dtype=np.uint16)
        inst = np.empty(size, dtype=np.uint16)
        sem[scene.source_index[mask]] = refined.semantic[mask]
        inst[scene.source_index[mask]] = refined.instance[mask]
        out.append(PanopticLabels(sem, inst))
    return out


def group_scans(scan_ids: list, window: int) -> list:
    """Partition scan ids into consecutive scenes of at most ``window`` scans."""
    if window < 1:
        raise ConfigError("scene window must be >= 1")
    return [scan_ids[i : i + window] for i in range(0, len(scan_ids), window)]


@dataclass
class IcpParams:
    max_iterations: int = 30
    correspondence_radius: float = 1.0  # meters
    convergence_threshold: float = 1e-4  # meters, change in RMS residual


@dataclass
class IcpResult:
    transform: RigidTransform
    rms: float
    converged: bool
    iterations: int
    residual_trace: list = field(default_factory=list)


def _kabsch(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid alignment of paired points (64-bit throughout)."""
    src = src.astype(np.float64)
    dst = dst.astype(np.float64)
    sc, dc = src.mean(axis=0), dst.mean(axis=0)
    h = (src - sc).T @ (dst - dc)
    u, s, vt = np.linalg.svd(h)
    if s[-1] <= 1e-9 * max(s[0], 1.0):
        raise DegenerateGeometry(
            "correspondences are coplanar/collinear; alignment is rank-deficient"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, dc - r @ sc)


def icp_align(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform | None = None,
    params: IcpParams | None = None,
) -> IcpResult:
    """Point-to-point ICP estimating the source -> target transform.

    Stops when the RMS residual change drops below the convergence
    threshold; if a re-matching step would increase the residual the
    previous estimate is kept, so the reported trace never increases.
    """
    params = params or IcpParams()
    if len(source) < 100 or len(target) < 100:
        raise ConfigError("icp_align needs at least 100 points per cloud")
    estimate = init or RigidTransform.identity()
    tree = cKDTree(target.points.astype(np.float64))
    src = source.points.astype(np.float64)

    trace: list = []
    best_rms = np.inf
    best_estimate = estimate
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        moved = estimate.apply(src)
        dist, idx = tree.query(moved, k=1, distance_upper_bound=params.correspondence_radius)
        matched = np.isfinite(dist)
        if matched.sum() < 3:
            return IcpResult(best_estimate, best_rms, False, iterations, trace)
        rms = float(np.sqrt(np.mean(dist[matched] ** 2)))
        if rms > best_rms:
            break  # re-matching made things worse; keep the previous estimate
        trace.append(rms)
        improvement = best_rms - rms
        best_rms = rms
        best_estimate = estimate
        if improvement < params.convergence_threshold:
            converged = True
            break
        delta = _kabsch(moved[matched], target.points[idx[matched]].astype(np.float64))
        estimate = delta.compose(estimate)
    return IcpResult(best_estimate, best_rms, converged, iterations, trace)
