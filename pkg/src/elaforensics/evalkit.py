"""PASCAL-style detection scoring for a single "tampered" class.

Detections from all images are visited in one global descending-score
sweep.  A detection is a true positive when the unmatched ground-truth box
it overlaps most, in the same image, has IoU strictly greater than the
threshold; that box is then consumed.  Average precision is the 11-point
interpolated mean over recalls 0.0, 0.1, ..., 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .detect import Detection, read_detections
from .errors import InvalidParameter, NoGroundTruth, UnknownImage
from .geometry import BBox, iou_matrix
from .imaging import PathLike
from .synth import read_annotations

DEFAULT_IOU = 0.5


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    is_tp: tuple[bool, ...]  # in sweep order
    scores: tuple[float, ...]  # in sweep order

    @property
    def n_ground_truth(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class PrCurve:
    points: tuple[tuple[float, float], ...]  # (recall, precision)


def _validate_iou(iou_thresh: float) -> None:
    if not 0 < iou_thresh <= 1:
        raise InvalidParameter(f"iou threshold must be in (0, 1], got {iou_thresh}")


def match_detections(
    dets: Mapping[str, Sequence[Detection]],
    gts: Mapping[str, Sequence[BBox]],
    iou_thresh: float = DEFAULT_IOU,
) -> MatchResult:
    _validate_iou(iou_thresh)
    order = sorted(
        ((d.score, path, k) for path, ds in dets.items() for k, d in enumerate(ds)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    overlaps = {}
    for path, ds in dets.items():
        boxes = gts.get(path, ())
        if ds and boxes:
            overlaps[path] = iou_matrix(
                np.array([d.box.as_array() for d in ds]), np.array([b.as_array() for b in boxes])
            )
    used = {path: np.zeros(len(boxes), dtype=bool) for path, boxes in gts.items()}
    is_tp = []
    for _, path, k in order:
        hit = False
        if path in overlaps:
            row = np.where(used[path], -1.0, overlaps[path][k])
            best = int(np.argmax(row))  # first index wins ties
            if row[best] > iou_thresh:
                used[path][best] = True
                hit = True
        is_tp.append(hit)
    tp = sum(is_tp)
    n_gt = sum(len(b) for b in gts.values())
    return MatchResult(tp, len(is_tp) - tp, n_gt - tp, tuple(is_tp), tuple(s for s, _, _ in order))


def precision(tp: int, fp: int) -> float:
    if tp < 0 or fp < 0:
        raise InvalidParameter("counts must be non-negative")
    return tp / (tp + fp) if tp + fp else 0.0


def recall(tp: int, fn: int) -> float:
    if tp < 0 or fn < 0:
        raise InvalidParameter("counts must be non-negative")
    if tp + fn == 0:
        raise NoGroundTruth("recall is undefined without ground-truth boxes")
    return tp / (tp + fn)


def pr_curve(match: MatchResult) -> PrCurve:
    """One (recall, precision) point after each detection of the sweep."""
    n_gt = match.n_ground_truth
    if n_gt == 0:
        return PrCurve(())
    points = []
    tp = fp = 0
    for hit in match.is_tp:
        tp += hit
        fp += not hit
        points.append((tp / n_gt, tp / (tp + fp)))
    return PrCurve(tuple(points))


def interpolated_precision(curve: PrCurve, r: float) -> float:
    best = 0.0
    for rec, prec in curve.points:
        if rec >= r and prec > best:
            best = prec
    return best


def ap_11point(curve: PrCurve) -> float:
    return sum(interpolated_precision(curve, k / 10) for k in range(11)) / 11


def evaluate_records(
    dets: Mapping[str, Sequence[Detection]],
    gts: Mapping[str, Sequence[BBox]],
    iou_thresh: float = DEFAULT_IOU,
) -> dict:
    unknown = sorted(set(dets) - set(gts))
    if unknown:
        raise UnknownImage(f"detections reference images missing from ground truth: {unknown[:5]}")
    match = match_detections(dets, gts, iou_thresh)
    curve = pr_curve(match)
    return {
        "iou_thresh": iou_thresh,
        "precision": precision(match.tp, match.fp),
        "recall": recall(match.tp, match.fn),
        "ap": ap_11point(curve),
        "tp": match.tp,
        "fp": match.fp,
        "fn": match.fn,
        "n_images": len(gts),
        "n_ground_truth": match.n_ground_truth,
        "n_detections": match.tp + match.fp,
    }


def evaluate(dets_file: PathLike, gt_file: PathLike, iou_thresh: float = DEFAULT_IOU) -> dict:
    _validate_iou(iou_thresh)
    gts: dict[str, list[BBox]] = {}
    for ann in read_annotations(gt_file):
        gts.setdefault(ann.image_path, []).extend(lb.box for lb in ann.boxes)
    report = evaluate_records(read_detections(dets_file), gts, iou_thresh)
    report["detections_file"] = str(Path(dets_file))
    report["ground_truth_file"] = str(Path(gt_file))
    return report


def format_report(report: dict) -> str:
    rows = [
        ("AP (11-point)", f"{report['ap']:.4f}"),
        ("precision", f"{report['precision']:.4f}"),
        ("recall", f"{report['recall']:.4f}"),
        ("TP / FP / FN", f"{report['tp']} / {report['fp']} / {report['fn']}"),
        ("images", str(report["n_images"])),
        ("ground-truth boxes", str(report["n_ground_truth"])),
        ("detections", str(report["n_detections"])),
        ("IoU threshold", f"> {report['iou_thresh']}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)
