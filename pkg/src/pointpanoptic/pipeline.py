"""End-to-end orchestration: dataset layout, per-scene refinement,
evaluation, synthesis, and the ablation sweep.

Dataset layout (all paths relative to the dataset root):

    scans/<scan_id>.bin            point clouds, 5 float32 per point
    images/<scan_id>/cam<k>.png    per-scan label images, one per camera
    calibration.txt                camera models
    poses.txt                      scan -> world poses, parallel to sorted ids
    scenes.txt                     optional scene grouping (scan ids per line)
    labels/<name>/<scan_id>.label  packed uint32 point labels

Scenes are processed independently (optionally in parallel); outputs are
merged in scan order so artifacts are identical regardless of scheduling.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io as pio
from .accumulate import Scene, accumulate, group_scans, split_scene
from .cluster import NOISE, ClusterParams, hdbscan, reassign_noise, single_cluster_fallback
from .config import PipelineConfig
from .core import ClassTable
from .errors import ConfigError, DataError, IoError, NoClusters
from .ground import segment_ground
from .metrics import EvalReport, PanopticAggregator
from .projection import label_points
from .refine import correct_instances, merge_partition_clusterings, refine_semantics
from .synth import SyntheticWorld, default_class_table, generate_world, load_world_spec, save_world_spec, standard_world, world_to_dict

_GROUND_STREAM = 0x6D0


@dataclass
class DatasetIndex:
    root: str
    scan_ids: list
    poses: list
    cameras: list
    scenes: list  # lists of scan ids

    def scan_path(self, scan_id: str) -> str:
        return os.path.join(self.root, "scans", f"{scan_id}.bin")

    def image_paths(self, scan_id: str) -> list:
        d = os.path.join(self.root, "images", scan_id)
        if not os.path.isdir(d):
            raise IoError(f"missing image directory {d}")
        names = sorted(fn for fn in os.listdir(d) if fn.endswith(".png"))
        return [os.path.join(d, fn) for fn in names]

    def label_path(self, name: str, scan_id: str) -> str:
        return os.path.join(self.root, "labels", name, f"{scan_id}.label")

    def pose_of(self, scan_id: str):
        return self.poses[self.scan_ids.index(scan_id)]


def open_dataset(root: str, scene_window: int = 40, need_cameras: bool = True) -> DatasetIndex:
    scans_dir = os.path.join(root, "scans")
    if not os.path.isdir(scans_dir):
        raise IoError(f"dataset has no scans/ directory: {root}")
    scan_ids = sorted(
        os.path.splitext(fn)[0] for fn in os.listdir(scans_dir) if fn.endswith(".bin")
    )
    if not scan_ids:
        raise IoError(f"no .bin scans under {scans_dir}")
    poses = pio.read_poses(os.path.join(root, "poses.txt"))
    if len(poses) != len(scan_ids):
        raise ConfigError(
            f"poses.txt has {len(poses)} rows but dataset has {len(scan_ids)} scans"
        )
    cameras = []
    calib = os.path.join(root, "calibration.txt")
    if need_cameras or os.path.exists(calib):
        cameras = pio.read_calibration(calib)
    scenes_file = os.path.join(root, "scenes.txt")
    if os.path.exists(scenes_file):
        scenes = pio.read_scene_groups(scenes_file)
        known = set(scan_ids)
        for group in scenes:
            missing = [s for s in group if s not in known]
            if missing:
                raise ConfigError(f"scenes.txt references unknown scans: {missing}")
    else:
        scenes = group_scans(scan_ids, scene_window)
    return DatasetIndex(root, scan_ids, poses, cameras, scenes)


def _table_of(cfg: PipelineConfig) -> ClassTable:
    return cfg.table or default_class_table()


# ---------------------------------------------------------------------------
# project


def run_project(cfg: PipelineConfig, label_name: str = "primal") -> int:
    """Project per-scan label images onto points; write primal labels."""
    ds = open_dataset(cfg.dataset, cfg.scene_window)
    table = _table_of(cfg)
    out_dir = os.path.join(cfg.dataset, "labels", label_name)
    os.makedirs(out_dir, exist_ok=True)
    for scan_id in ds.scan_ids:
        cloud = pio.read_point_cloud(ds.scan_path(scan_id))
        paths = ds.image_paths(scan_id)
        if len(paths) != len(ds.cameras):
            raise ConfigError(
                f"{scan_id}: {len(paths)} images for {len(ds.cameras)} cameras"
            )
        images = [pio.read_label_image(p, table) for p in paths]
        labels = label_points(cloud, ds.cameras, images)
        pio.write_labels(labels, ds.label_path(label_name, scan_id))
    return len(ds.scan_ids)


# ---------------------------------------------------------------------------
# refine


def refine_scene(
    scans: list,
    labels: list,
    poses: list,
    cfg: PipelineConfig,
    scene_seed_key: tuple,
):
    """Refine one scene; returns (per-scan PanopticLabels, log dict)."""
    table = _table_of(cfg)
    t0 = time.perf_counter()
    scene = accumulate(scans, labels, poses)
    rng = np.random.default_rng(np.random.SeedSequence(list(scene_seed_key) + [_GROUND_STREAM]))
    gmask = segment_ground(scene, cfg.ground, rng)
    scene.ground_mask = gmask

    parts = []
    cluster_counts = {}
    for name, idx in (
        ("ground", np.flatnonzero(gmask)),
        ("nonground", np.flatnonzero(~gmask)),
    ):
        if idx.size == 0:
            cluster_counts[name] = 0
            continue
        cl = hdbscan(scene.points[idx], cfg.cluster)
        try:
            cl = reassign_noise(scene.points[idx], cl, cfg.noise_knn)
        except NoClusters:
            cl = single_cluster_fallback(idx.size)
        parts.append((idx, cl))
        cluster_counts[name] = cl.count
    merged = merge_partition_clusterings(parts, len(scene))
    y_star = refine_semantics(scene, merged, cfg.refine, table)

    refined = []
    for i, scan in enumerate(scans):
        sel = scene.scan_index == i
        y_scan = np.empty(len(scan), dtype=np.uint16)
        y_scan[scene.source_index[sel]] = y_star[sel]
        refined.append(correct_instances(scan.points, labels[i], y_scan, table))
    runtime = time.perf_counter() - t0
    log = {
        "scan_ids": [s.scan_id for s in scans],
        "points": int(len(scene)),
        "ground_points": int(gmask.sum()),
        "clusters": cluster_counts,
        "runtime_s": round(runtime, 6),
    }
    return refined, log


def _refine_scene_task(args):
    root, scan_ids, cfg, scene_idx, src_name = args
    ds = open_dataset(root, cfg.scene_window, need_cameras=False)
    scans = [pio.read_point_cloud(ds.scan_path(s)) for s in scan_ids]
    labels = [pio.read_labels(ds.label_path(src_name, s)) for s in scan_ids]
    for sid, scan, lab in zip(scan_ids, scans, labels):
        if len(scan) != len(lab):
            raise DataError(f"{sid}: label count {len(lab)} != point count {len(scan)}")
    poses = [ds.pose_of(s) for s in scan_ids]
    refined, log = refine_scene(scans, labels, poses, cfg, (cfg.seed, scene_idx))
    log["scene"] = scene_idx
    return scene_idx, scan_ids, refined, log


def run_refine(
    cfg: PipelineConfig,
    src_name: str = "primal",
    dst_name: str = "refined",
    dst_root: str | None = None,
) -> list:
    """Refine every scene; writes labels and returns per-scene logs."""
    ds = open_dataset(cfg.dataset, cfg.scene_window, need_cameras=False)
    out_dir = os.path.join(dst_root or cfg.dataset, "labels", dst_name)
    os.makedirs(out_dir, exist_ok=True)
    tasks = [
        (cfg.dataset, scan_ids, cfg, idx, src_name)
        for idx, scan_ids in enumerate(ds.scenes)
    ]
    workers = cfg.workers or os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_refine_scene_task, tasks))
    else:
        results = [_refine_scene_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    logs = []
    for _, scan_ids, refined, log in results:
        for sid, lab in zip(scan_ids, refined):
            pio.write_labels(lab, os.path.join(out_dir, f"{sid}.label"))
        logs.append(log)
    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, "refine_log.jsonl"), "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(json.dumps(log, sort_keys=True) + "\n")
    return logs


# ---------------------------------------------------------------------------
# eval


def run_eval(
    cfg: PipelineConfig,
    pred_name: str = "refined",
    gt_name: str = "gt",
    pred_root: str | None = None,
    report_name: str = "report",
) -> EvalReport:
    ds = open_dataset(cfg.dataset, cfg.scene_window, need_cameras=False)
    table = _table_of(cfg)
    pred_dir = os.path.join(pred_root or cfg.dataset, "labels", pred_name)
    agg = PanopticAggregator(table)
    for scan_id in ds.scan_ids:
        pred = pio.read_labels(os.path.join(pred_dir, f"{scan_id}.label"))
        gt = pio.read_labels(ds.label_path(gt_name, scan_id))
        agg.add_scan(pred, gt)
    report = agg.finalize(config_hash=cfg.config_hash())
    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, f"{report_name}.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    with open(os.path.join(cfg.output, f"{report_name}.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    return report


# ---------------------------------------------------------------------------
# synth


def write_dataset(world: SyntheticWorld, root: str, scan_prefix: str = ""):
    """Materialize a synthetic world in the documented dataset layout."""
    os.makedirs(os.path.join(root, "scans"), exist_ok=True)
    os.makedirs(os.path.join(root, "labels", "gt"), exist_ok=True)
    ids = [scan_prefix + s.scan_id for s in world.scans]
    for sid, scan, images, gt in zip(ids, world.scans, world.label_images, world.gt_labels):
        pio.write_point_cloud(scan, os.path.join(root, "scans", f"{sid}.bin"))
        img_dir = os.path.join(root, "images", sid)
        os.makedirs(img_dir, exist_ok=True)
        for k, img in enumerate(images):
            pio.write_label_image(img, os.path.join(img_dir, f"cam{k:02d}.png"))
        pio.write_labels(gt, os.path.join(root, "labels", "gt", f"{sid}.label"))
    pio.write_poses(world.poses, os.path.join(root, "poses.txt"))
    pio.write_calibration(world.cameras, os.path.join(root, "calibration.txt"))
    pio.write_scene_groups([ids], os.path.join(root, "scenes.txt"))
    with open(os.path.join(root, "world.json"), "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(world.spec), fh, indent=2, sort_keys=True)


def write_suite_dataset(root: str, seeds, n_objects: int = 120, n_scans: int = 6):
    """One dataset holding several suite worlds, one scene per world.

    Scan ids get a per-world prefix; poses.txt and scenes.txt cover the
    union. All worlds share the same camera rig, so one calibration file
    serves the whole dataset.
    """
    all_ids, all_poses = [], []
    for k, seed in enumerate(seeds):
        world = generate_world(standard_world(seed, n_objects, n_scans), seed=seed)
        prefix = f"{k:02d}"
        write_dataset(world, root, scan_prefix=prefix)
        all_ids.append([prefix + s.scan_id for s in world.scans])
        all_poses.extend(world.poses)
    pio.write_poses(all_poses, os.path.join(root, "poses.txt"))
    pio.write_scene_groups(all_ids, os.path.join(root, "scenes.txt"))
    return all_ids


def run_synth(cfg: PipelineConfig) -> int:
    spec = load_world_spec(cfg.world) if cfg.world else standard_world(cfg.suite_seed)
    world = generate_world(spec, seed=cfg.seed)
    write_dataset(world, cfg.dataset)
    return len(world.scans)


# ---------------------------------------------------------------------------
# ablation sweep


def run_ablate(cfg: PipelineConfig, src_name: str = "primal", gt_name: str = "gt") -> dict:
    """Sweep the minimum cluster size; refine + eval per setting."""
    rows = []
    for s in cfg.ablation_sizes:
        sub = PipelineConfig(
            dataset=cfg.dataset,
            output=os.path.join(cfg.output, "ablate", f"s{s:03d}"),
            seed=cfg.seed,
            workers=cfg.workers,
            scene_window=cfg.scene_window,
            table=cfg.table,
            ground=cfg.ground,
            cluster=ClusterParams(
                min_cluster_size=int(s),
                min_samples=cfg.cluster.min_samples,
                selection=cfg.cluster.selection,
                mst_method=cfg.cluster.mst_method,
            ),
            refine=cfg.refine,
            noise_knn=cfg.noise_knn,
            raw=cfg.raw,
        )
        logs = run_refine(sub, src_name=src_name, dst_name="refined", dst_root=sub.output)
        report = run_eval(sub, pred_name="refined", gt_name=gt_name, pred_root=sub.output)
        rows.append(
            {
                "min_cluster_size": int(s),
                "mean_scene_runtime_s": float(np.mean([l["runtime_s"] for l in logs])),
                "pq": round(100.0 * report.mean_pq, 6),
                "miou": round(100.0 * report.mean_iou, 6),
            }
        )
    summary = {"sweep": rows}
    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    lines = [f"{'size':>6}{'runtime_s':>12}{'PQ':>8}{'mIoU':>8}"]
    for r in rows:
        lines.append(
            f"{r['min_cluster_size']:>6}{r['mean_scene_runtime_s']:>12.3f}"
            f"{r['pq']:>8.1f}{r['miou']:>8.1f}"
        )
    with open(os.path.join(cfg.output, "ablation.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return summary
