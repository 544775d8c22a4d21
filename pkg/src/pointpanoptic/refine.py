"""Semantic correction by in-cluster voting and per-scan instance repair.

Voting rules, applied per cluster over the frequencies of ALL member
labels (void included in the denominator):

1. if void is the most frequent class and its frequency exceeds
   ``tau_void``, the cluster becomes void;
2. else if any rare class has frequency above ``tau``, the most frequent
   such rare class wins (ties: lowest class id);
3. else the most frequent non-void class wins (ties: lowest class id);
   a cluster with only void labels stays void.

Instance correction runs on the original per-scan labels: points whose
semantic class was changed by voting lose their instance id and adopt
the id of the nearest same-scan point of their new class that kept a
valid id; classes without any donor get fresh ids, one per spatial group
of leftover points.
"""

from dataclasses import dataclass

import numpy as np

from .accumulate import Scene
from .cluster import NOISE, Clustering, build_kdtree
from .core import (
    INSTANCE_MODULUS,
    NO_INSTANCE,
    UNKNOWN_INSTANCE,
    VOID_ID,
    ClassTable,
)
from .errors import ConfigError, CoverageError, InstanceOverflow, LengthMismatch
from .io import PanopticLabels


@dataclass
class RefineConfig:
    tau: float = 0.3  # rare-class frequency threshold
    tau_void: float = 0.5  # void-dominance threshold

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError("tau must lie in (0, 1]")
        if not (0.0 < self.tau_void <= 1.0):
            raise ConfigError("tau_void must lie in (0, 1]")


def vote_cluster(labels: np.ndarray, cfg: RefineConfig, table: ClassTable) -> int:
    """Elect the semantic class of one cluster from its member labels."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigError("cannot vote on an empty cluster")
    counts = np.bincount(labels, minlength=table.num_classes)
    total = labels.size
    top = int(np.argmax(counts))  # ties resolve to the lowest class id
    if top == VOID_ID and counts[VOID_ID] / total > cfg.tau_void:
        return VOID_ID
    rare = table.rare_ids()
    if rare.size:
        rare_counts = counts[rare]
        passing = rare_counts / total > cfg.tau
        if passing.any():
            best = rare[passing][np.argmax(rare_counts[passing])]
            return int(best)
    nonvoid = counts[1:]
    if nonvoid.max(initial=0) == 0:
        return VOID_ID  # all-void cluster below the dominance threshold
    return int(np.argmax(nonvoid)) + 1


def refine_semantics(
    scene: Scene, clustering: Clustering, cfg: RefineConfig, table: ClassTable
) -> np.ndarray:
    """Per-point corrected semantic ids; every point takes its cluster's vote."""
    if len(clustering) != len(scene):
        raise LengthMismatch("clustering not parallel to scene")
    ids = clustering.cluster_id
    if np.any(ids == NOISE):
        raise CoverageError(
            f"{int((ids == NOISE).sum())} points lack a cluster id; "
            "reassign noise (or apply the single-cluster fallback) first"
        )
    out = np.empty(len(scene), dtype=np.uint16)
    semantic = scene.labels.semantic
    for cid in range(clustering.count):
        members = np.flatnonzero(ids == cid)
        if members.size == 0:
            continue
        out[members] = vote_cluster(semantic[members], cfg, table)
    return out


def merge_partition_clusterings(parts: list, n: int) -> Clustering:
    """Combine per-partition clusterings (index array, Clustering) pairs
    into one scene-wide Clustering with disjoint id ranges."""
    ids = np.full(n, NOISE, dtype=np.int32)
    offset = 0
    for index, cl in parts:
        sub = cl.cluster_id.copy()
        sub[sub != NOISE] += offset
        ids[index] = sub
        offset += cl.count
    return Clustering(ids, offset)


def correct_instances(
    scan_points: np.ndarray,
    primal: PanopticLabels,
    y_star: np.ndarray,
    table: ClassTable,
) -> PanopticLabels:
    """Propagate semantic corrections into the instance ids of one scan.

    Keeps the primal id where the class is unchanged, invalidates it
    otherwise, then repairs invalidated thing points by nearest-donor
    adoption or fresh ids per 1 m connected group.
    """
    n = len(primal)
    if len(scan_points) != n or len(y_star) != n:
        raise LengthMismatch("scan points, primal labels and y* must be parallel")
    thing = table.thing_mask()[y_star]
    unchanged = primal.semantic == y_star

    instance = np.where(unchanged, primal.instance, UNKNOWN_INSTANCE).astype(np.uint16)
    instance[~thing] = NO_INSTANCE  # stuff and void never carry an instance

    pts = np.asarray(scan_points, dtype=np.float64)
    unknown = np.flatnonzero(instance == UNKNOWN_INSTANCE)
    for cls in np.unique(y_star[unknown]):
        members = unknown[y_star[unknown] == cls]
        donors = np.flatnonzero(thing & unchanged & (y_star == cls))
        if donors.size:
            tree = build_kdtree(pts[donors])
            _, idx = tree.query(pts[members], k=1)
            instance[members] = instance[donors[idx[:, 0]]]
        else:
            _assign_fresh_ids(pts, members, instance, int(cls), y_star)

    if np.any(instance == UNKNOWN_INSTANCE):
        raise CoverageError("instance correction left UNKNOWN ids behind")
    _check_overflow(y_star, instance)
    return PanopticLabels(y_star.astype(np.uint16), instance)


def _assign_fresh_ids(pts, members, instance, cls, y_star, radius: float = 1.0):
    """One new id per radius-connected group of donor-less points."""
    existing = instance[(y_star == cls) & (instance != UNKNOWN_INSTANCE)]
    next_id = int(existing.max()) + 1 if existing.size else 1
    sub = pts[members]
    parent = np.arange(len(members), dtype=np.intp)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = build_kdtree(sub)
    for a, b in tree.query_pairs(radius):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(members))])
    for root in np.unique(roots):  # ascending: deterministic id order
        instance[members[roots == root]] = next_id
        next_id += 1


def _check_overflow(y_star, instance):
    for cls in np.unique(y_star[instance != NO_INSTANCE]):
        ids = instance[(y_star == cls) & (instance != NO_INSTANCE)]
        if ids.max(initial=0) >= INSTANCE_MODULUS:
            raise InstanceOverflow(
                f"class {int(cls)} holds instance ids beyond {INSTANCE_MODULUS - 1}"
            )
