"""Panoptic quality and mIoU evaluation with per-class breakdown.

Segments are (class, instance) groups for thing classes and one group
per class for stuff. A prediction segment matches a ground-truth segment
of the same class iff their IoU exceeds 0.5, which makes the matching
unique. Ground-truth void points are removed from the evaluation
entirely (they count neither for nor against any segment). Per-class
values live in [0, 1]; the JSON/text renderings scale to percent.

Means are unweighted over classes present in the ground truth: classes
with at least one gt segment for PQ, classes with at least one gt point
for mIoU.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .core import VOID_ID, ClassTable
from .errors import ClassTableMismatch, LengthMismatch
from .io import PanopticLabels

REPORT_SCHEMA_VERSION = 1

_SEGMENT_MOD = 1 << 17  # instance ids fit comfortably below this


@dataclass
class EvalReport:
    table: ClassTable
    pq: np.ndarray
    sq: np.ndarray
    rq: np.ndarray
    iou: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    present_pq: np.ndarray  # classes with gt segments
    present_iou: np.ndarray  # classes with gt points
    mean_pq: float
    mean_iou: float
    scan_count: int = 0
    config_hash: str = ""

    def to_dict(self) -> dict:
        classes = {}
        for c in range(1, self.table.num_classes):
            classes[self.table.names[c]] = {
                "pq": round(100.0 * float(self.pq[c]), 6),
                "sq": round(100.0 * float(self.sq[c]), 6),
                "rq": round(100.0 * float(self.rq[c]), 6),
                "iou": round(100.0 * float(self.iou[c]), 6),
                "tp": int(self.tp[c]),
                "fp": int(self.fp[c]),
                "fn": int(self.fn[c]),
                "in_gt": bool(self.present_pq[c] or self.present_iou[c]),
            }
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config_hash": self.config_hash,
            "scan_count": self.scan_count,
            "means": {
                "pq": round(100.0 * self.mean_pq, 6),
                "miou": round(100.0 * self.mean_iou, 6),
            },
            "classes": classes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Aligned per-class table mirroring the usual benchmark layout."""
        name_w = max(len(n) for n in self.table.names) + 2
        lines = [
            f"{'class':<{name_w}}{'PQ':>7}{'SQ':>7}{'RQ':>7}{'IoU':>7}{'TP':>6}{'FP':>6}{'FN':>6}"
        ]
        for c in range(1, self.table.num_classes):
            lines.append(
                f"{self.table.names[c]:<{name_w}}"
                f"{100 * self.pq[c]:>7.1f}{100 * self.sq[c]:>7.1f}"
                f"{100 * self.rq[c]:>7.1f}{100 * self.iou[c]:>7.1f}"
                f"{self.tp[c]:>6d}{self.fp[c]:>6d}{self.fn[c]:>6d}"
            )
        lines.append(
            f"{'mean':<{name_w}}PQ {100 * self.mean_pq:.1f}  mIoU {100 * self.mean_iou:.1f}"
            f"  (scans: {self.scan_count})"
        )
        return "\n".join(lines)


def _segment_keys(labels: PanopticLabels, thing_mask: np.ndarray) -> np.ndarray:
    """Encode (class, instance-or-0) into one integer key per point."""
    inst = np.where(thing_mask[labels.semantic], labels.instance, 0)
    return labels.semantic.astype(np.int64) * _SEGMENT_MOD + inst


class PanopticAggregator:
    """Accumulates confusion and segment-matching statistics over scans."""

    def __init__(self, table: ClassTable):
        self.table = table
        c = table.num_classes
        self.confusion = np.zeros((c, c), dtype=np.int64)
        self.iou_sum = np.zeros(c)
        self.tp = np.zeros(c, dtype=np.int64)
        self.fp = np.zeros(c, dtype=np.int64)
        self.fn = np.zeros(c, dtype=np.int64)
        self.scan_count = 0

    def add_scan(self, pred: PanopticLabels, gt: PanopticLabels):
        if len(pred) != len(gt):
            raise LengthMismatch(
                f"prediction ({len(pred)}) and ground truth ({len(gt)}) differ in length"
            )
        c = self.table.num_classes
        if max(pred.semantic.max(initial=0), gt.semantic.max(initial=0)) >= c:
            raise LengthMismatch("semantic id exceeds class table")
        valid = gt.semantic != VOID_ID
        gt_sem = gt.semantic[valid].astype(np.int64)
        pr_sem = pred.semantic[valid].astype(np.int64)
        self.confusion += np.bincount(
            gt_sem * c + pr_sem, minlength=c * c
        ).reshape(c, c)

        thing = self.table.thing_mask()
        gt_keys = _segment_keys(
            PanopticLabels(gt.semantic[valid], gt.instance[valid]), thing
        )
        pr_keys = _segment_keys(
            PanopticLabels(pred.semantic[valid], pred.instance[valid]), thing
        )

        gt_ids, gt_sizes = np.unique(gt_keys, return_counts=True)
        pr_all, pr_sizes_all = np.unique(pr_keys, return_counts=True)
        pr_void = (pr_all // _SEGMENT_MOD) == VOID_ID  # void predictions: no segment
        pr_ids, pr_sizes = pr_all[~pr_void], pr_sizes_all[~pr_void]

        pair_keys = gt_keys * (_SEGMENT_MOD * _SEGMENT_MOD * 4) + pr_keys
        pairs, inter = np.unique(pair_keys, return_counts=True)
        pair_gt = pairs // (_SEGMENT_MOD * _SEGMENT_MOD * 4)
        pair_pr = pairs % (_SEGMENT_MOD * _SEGMENT_MOD * 4)

        gt_size_of = dict(zip(gt_ids.tolist(), gt_sizes.tolist()))
        pr_size_of = dict(zip(pr_ids.tolist(), pr_sizes.tolist()))
        matched_gt, matched_pr = set(), set()
        for g, p, i in zip(pair_gt.tolist(), pair_pr.tolist(), inter.tolist()):
            if g // _SEGMENT_MOD != p // _SEGMENT_MOD:
                continue  # classes differ: never a match
            if p not in pr_size_of:
                continue  # void prediction
            union = gt_size_of[g] + pr_size_of[p] - i
            iou = i / union
            if iou > 0.5:
                cls = int(g // _SEGMENT_MOD)
                self.tp[cls] += 1
                self.iou_sum[cls] += iou
                matched_gt.add(g)
                matched_pr.add(p)
        for g in gt_ids.tolist():
            if g not in matched_gt:
                self.fn[g // _SEGMENT_MOD] += 1
        for p in pr_ids.tolist():
            if p not in matched_pr:
                self.fp[p // _SEGMENT_MOD] += 1
        self.scan_count += 1

    def merge(self, other: "PanopticAggregator"):
        if self.table != other.table:
            raise ClassTableMismatch("aggregators built on different class tables")
        self.confusion += other.confusion
        self.iou_sum += other.iou_sum
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.scan_count += other.scan_count

    def finalize(self, config_hash: str = "") -> EvalReport:
        c = self.table.num_classes
        tp_pts = np.diag(self.confusion).astype(np.float64)
        fp_pts = self.confusion.sum(axis=0) - tp_pts
        fn_pts = self.confusion.sum(axis=1) - tp_pts
        denom_pts = tp_pts + fp_pts + fn_pts
        iou = np.divide(tp_pts, denom_pts, out=np.zeros(c), where=denom_pts > 0)

        denom = self.tp + 0.5 * self.fp + 0.5 * self.fn
        sq = np.divide(self.iou_sum, self.tp, out=np.zeros(c), where=self.tp > 0)
        rq = np.divide(self.tp, denom, out=np.zeros(c), where=denom > 0)
        pq = np.divide(self.iou_sum, denom, out=np.zeros(c), where=denom > 0)

        present_pq = (self.tp + self.fn) > 0
        present_pq[VOID_ID] = False
        present_iou = self.confusion.sum(axis=1) > 0
        present_iou[VOID_ID] = False
        mean_pq = float(pq[present_pq].mean()) if present_pq.any() else 0.0
        mean_iou = float(iou[present_iou].mean()) if present_iou.any() else 0.0
        return EvalReport(
            table=self.table,
            pq=pq,
            sq=sq,
            rq=rq,
            iou=iou,
            tp=self.tp.copy(),
            fp=self.fp.copy(),
            fn=self.fn.copy(),
            present_pq=present_pq,
            present_iou=present_iou,
            mean_pq=mean_pq,
            mean_iou=mean_iou,
            scan_count=self.scan_count,
            config_hash=config_hash,
        )


def miou(pred: np.ndarray, gt: np.ndarray, table: ClassTable):
    """Per-class IoU plus the mean over classes present in the ground truth."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise LengthMismatch("pred and gt must be parallel")
    agg = PanopticAggregator(table)
    zeros = np.zeros(len(pred), dtype=np.uint16)
    agg.add_scan(
        PanopticLabels(pred.astype(np.uint16), zeros),
        PanopticLabels(gt.astype(np.uint16), zeros),
    )
    report = agg.finalize()
    return report.iou, report.mean_iou


def panoptic_quality(
    pred: PanopticLabels, gt: PanopticLabels, table: ClassTable
) -> EvalReport:
    """Single-scan PQ report; see PanopticAggregator for multi-scan use."""
    agg = PanopticAggregator(table)
    agg.add_scan(pred, gt)
    return agg.finalize()


def report_diff(a: EvalReport, b: EvalReport) -> dict:
    """Per-class and mean deltas ``a - b`` in percent points, plus text."""
    if a.table != b.table:
        raise ClassTableMismatch("reports built on different class tables")
    classes = {}
    for c in range(1, a.table.num_classes):
        classes[a.table.names[c]] = {
            "pq": 100.0 * float(a.pq[c] - b.pq[c]),
            "iou": 100.0 * float(a.iou[c] - b.iou[c]),
        }
    means = {
        "pq": 100.0 * (a.mean_pq - b.mean_pq),
        "miou": 100.0 * (a.mean_iou - b.mean_iou),
    }
    name_w = max(len(n) for n in a.table.names) + 2
    lines = [f"{'class':<{name_w}}{'dPQ':>8}{'dIoU':>8}"]
    for name, row in classes.items():
        lines.append(f"{name:<{name_w}}{row['pq']:>+8.1f}{row['iou']:>+8.1f}")
    lines.append(f"{'mean':<{name_w}}{means['pq']:>+8.1f}{means['miou']:>+8.1f}")
    return {"means": means, "classes": classes, "text": "\n".join(lines)}
