"""Independent reference implementations used only by the tests.

Nothing here imports the package's evaluation or geometry code; boxes are
plain integer tuples and all arithmetic is exact.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def exact_iou(a, b) -> Fraction:
    iw = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return Fraction(inter, union)


def _tp_count(dets, gts, cut, thr) -> int:
    """True positives among detections scoring >= cut, matched greedily by score."""
    kept = sorted(
        ((s, img, k, box) for img, ds in dets.items() for k, (box, s) in enumerate(ds) if s >= cut),
        key=lambda t: -t[0],
    )
    used = {img: [False] * len(g) for img, g in gts.items()}
    tp = 0
    for _, img, _, box in kept:
        best, best_j = Fraction(-1), None
        for j, g in enumerate(gts.get(img, [])):
            if used[img][j]:
                continue
            v = exact_iou(box, g)
            if v > best:
                best, best_j = v, j
        if best_j is not None and best > thr:
            used[img][best_j] = True
            tp += 1
    return tp


def exhaustive_ap(dets, gts, thr=Fraction(1, 2)) -> Fraction:
    """11-point AP by re-running the matching at every score cut-off.

    ``dets`` maps image -> [(box, score)], ``gts`` maps image -> [box].
    Scores must be distinct.
    """
    n_gt = sum(len(g) for g in gts.values())
    cuts = sorted({s for ds in dets.values() for _, s in ds}, reverse=True)
    points = []
    for cut in cuts:
        n = sum(1 for ds in dets.values() for _, s in ds if s >= cut)
        tp = _tp_count(dets, gts, cut, thr)
        points.append((Fraction(tp, n_gt), Fraction(tp, n)))
    total = Fraction(0)
    for k in range(11):
        r = Fraction(k, 10)
        total += max((p for rec, p in points if rec >= r), default=Fraction(0))
    return total / 11


def random_instance(rng: np.random.Generator):
    """Random images with integer GT boxes and jittered / spurious detections."""
    n_images = int(rng.integers(1, 11))
    gts, dets = {}, {}
    for i in range(n_images):
        name = f"img{i:02d}.jpg"
        boxes = []
        for _ in range(int(rng.integers(0, 9))):
            x, y = (int(v) for v in rng.integers(0, 80, 2))
            w, h = (int(v) for v in rng.integers(4, 30, 2))
            boxes.append((x, y, x + w, y + h))
        gts[name] = boxes
        ds = []
        for g in boxes:
            for _ in range(int(rng.integers(0, 3))):
                j = rng.integers(-4, 5, 4)
                x1, y1 = g[0] + int(j[0]), g[1] + int(j[1])
                ds.append((x1, y1, max(x1 + 1, g[2] + int(j[2])), max(y1 + 1, g[3] + int(j[3]))))
        for _ in range(int(rng.integers(0, 4))):
            x, y = (int(v) for v in rng.integers(0, 80, 2))
            ds.append((x, y, x + int(rng.integers(2, 30)), y + int(rng.integers(2, 30))))
        dets[name] = ds
    if sum(len(g) for g in gts.values()) == 0:
        gts[next(iter(gts))].append((0, 0, 10, 10))
    n_det = sum(len(d) for d in dets.values())
    scores = iter(rng.permutation(n_det) / max(n_det, 1) + 0.001)
    scored = {img: [(b, float(next(scores))) for b in ds] for img, ds in dets.items()}
    return scored, gts
