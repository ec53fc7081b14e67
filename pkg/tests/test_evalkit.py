from __future__ import annotations

import json

import numpy as np
import pytest

from elaforensics.detect import Detection
from elaforensics.errors import InvalidParameter, NoGroundTruth, UnknownImage
from elaforensics.evalkit import (
    MatchResult,
    PrCurve,
    ap_11point,
    evaluate,
    evaluate_records,
    format_report,
    match_detections,
    pr_curve,
    precision,
    recall,
)
from elaforensics.geometry import BBox

from oracles import exhaustive_ap, random_instance

GT = BBox(0, 0, 10, 10)


def d(box, score):
    return Detection(box, score)


def to_package(dets, gts):
    return (
        {img: [Detection(BBox(*b), s) for b, s in ds] for img, ds in dets.items()},
        {img: [BBox(*b) for b in bs] for img, bs in gts.items()},
    )


# ---------------------------------------------------------------- matching


def test_exact_match():
    m = match_detections({"a": [d(GT, 1.0)]}, {"a": [GT]})
    assert (m.tp, m.fp, m.fn) == (1, 0, 0)


def test_second_detection_finds_gt_consumed():
    m = match_detections({"a": [d(GT, 0.9), d(BBox(0, 0, 10, 11), 0.8)]}, {"a": [GT]})
    assert (m.tp, m.fp, m.fn) == (1, 1, 0)
    assert m.is_tp == (True, False)


def test_iou_exactly_half_is_false_positive():
    half = BBox(0, 0, 10, 20)  # IoU 100/200
    m = match_detections({"a": [d(half, 0.9)]}, {"a": [GT]}, 0.5)
    assert (m.tp, m.fp, m.fn) == (0, 1, 1)


def test_detection_uses_next_best_unmatched_box():
    g1, g2 = BBox(0, 0, 10, 10), BBox(1, 0, 11, 10)
    m = match_detections({"a": [d(g1, 0.9), d(g2, 0.8)]}, {"a": [g1, g2]})
    assert m.is_tp == (True, True)


def test_matching_is_per_image():
    m = match_detections({"a": [d(GT, 0.9)], "b": []}, {"a": [], "b": [GT]})
    assert (m.tp, m.fp, m.fn) == (0, 1, 1)


def test_match_validates_threshold():
    with pytest.raises(InvalidParameter):
        match_detections({}, {}, 0.0)


# ---------------------------------------------------------------- P / R


def test_precision_examples():
    assert precision(9, 1) == pytest.approx(0.9)
    assert precision(0, 0) == 0.0
    assert precision(5, 0) == 1.0


def test_recall_examples():
    assert recall(9, 1) == pytest.approx(0.9)
    assert recall(0, 5) == 0.0
    assert recall(5, 0) == 1.0
    with pytest.raises(NoGroundTruth):
        recall(0, 0)


# ---------------------------------------------------------------- AP


def test_perfect_detector():
    gts = {"a": [GT, BBox(20, 20, 30, 30)], "b": [BBox(5, 5, 9, 9)]}
    dets = {k: [d(b, 1.0) for b in v] for k, v in gts.items()}
    assert ap_11point(pr_curve(match_detections(dets, gts))) == 1.0


def test_no_detections():
    assert ap_11point(pr_curve(match_detections({}, {"a": [GT]}))) == 0.0


def test_false_positive_then_true_positive():
    dets = {"a": [d(BBox(50, 50, 60, 60), 0.9), d(GT, 0.8)]}
    curve = pr_curve(match_detections(dets, {"a": [GT]}))
    assert curve.points == ((0.0, 0.0), (1.0, 0.5))
    assert ap_11point(curve) == 0.5


def test_interpolation_takes_max_to_the_right():
    curve = PrCurve(((0.5, 0.5), (0.5, 0.4), (1.0, 0.6)))
    assert ap_11point(curve) == pytest.approx(0.6)


def test_ap_matches_exhaustive_oracle():
    rng = np.random.default_rng(2718)
    for _ in range(100):
        dets, gts = random_instance(rng)
        pdets, pgts = to_package(dets, gts)
        ap = ap_11point(pr_curve(match_detections(pdets, pgts)))
        assert abs(ap - float(exhaustive_ap(dets, gts))) <= 1e-9


def test_ap_invariants():
    rng = np.random.default_rng(5)
    for _ in range(30):
        dets, gts = random_instance(rng)
        pdets, pgts = to_package(dets, gts)
        m = match_detections(pdets, pgts)
        assert m.tp + m.fp == sum(len(v) for v in dets.values())
        assert m.tp + m.fn == sum(len(v) for v in gts.values())
        ap = ap_11point(pr_curve(m))
        assert 0.0 <= ap <= 1.0
        recalls = [r for r, _ in pr_curve(m).points]
        assert recalls == sorted(recalls)


def test_ap_independent_of_image_order():
    rng = np.random.default_rng(6)
    dets, gts = random_instance(rng)
    pdets, pgts = to_package(dets, gts)
    rev_d = dict(reversed(list(pdets.items())))
    rev_g = dict(reversed(list(pgts.items())))
    assert ap_11point(pr_curve(match_detections(rev_d, rev_g))) == ap_11point(pr_curve(match_detections(pdets, pgts)))


# ---------------------------------------------------------------- records / files


def test_unknown_image_rejected():
    with pytest.raises(UnknownImage):
        evaluate_records({"z": []}, {"a": [GT]})


def test_empty_detections_report():
    rep = evaluate_records({}, {"a": [GT]})
    assert (rep["ap"], rep["recall"], rep["precision"]) == (0.0, 0.0, 0.0)


def _write_gt(path, boxes):
    from elaforensics.synth import Annotation, LabeledBox, write_annotations

    write_annotations(path, [Annotation("x.jpg", 64, 64, True, tuple(LabeledBox(b) for b in boxes))])


def test_evaluate_files(tmp_path):
    _write_gt(tmp_path / "gt.jsonl", [GT])
    (tmp_path / "d.jsonl").write_text(json.dumps({"image_path": "x.jpg", "detections": [{**GT.to_dict(), "score": 1.0}]}) + "\n")
    rep = evaluate(tmp_path / "d.jsonl", tmp_path / "gt.jsonl")
    assert rep["ap"] == 1.0 and rep["tp"] == 1
    assert "AP (11-point)" in format_report(rep)
