"""Baseline tamper localizer driven purely by ELA block scores.

Scores are contrast statistics (inside-vs-outside mean error level over
255), not calibrated probabilities.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidParameter, OutOfBounds, ParseError
from .geometry import BBox, nms
from .imaging import BLOCK, DEFAULT_ELA_QUALITY, DEFAULT_SCALE, ElaResult, ImageBuffer, PathLike, compute_ela, validate_quality
from .synth import read_jsonl

# Defaults chosen by the parameter sweep in scripts/calibrate.py; see calibration/.
DEFAULT_PERCENTILE = 90.0
DEFAULT_MIN_AREA = 2048.0
DEFAULT_NMS_IOU = 0.1

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float

    def to_dict(self) -> dict:
        return {**self.box.to_dict(), "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        score = d["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
            raise InvalidParameter("score must be a finite number")
        return cls(BBox.from_dict(d), float(score))


@dataclass(frozen=True)
class DetectParams:
    quality: int = DEFAULT_ELA_QUALITY
    scale: float = DEFAULT_SCALE
    percentile: float = DEFAULT_PERCENTILE
    min_area: float = DEFAULT_MIN_AREA
    nms_iou: float = DEFAULT_NMS_IOU
    connectivity: int = 4

    def __post_init__(self):
        validate_quality(self.quality)
        if not self.scale > 0:
            raise InvalidParameter("scale must be positive")
        if not 0 < self.percentile < 100:
            raise InvalidParameter("percentile must be in (0, 100)")
        if self.min_area < 0:
            raise InvalidParameter("min_area must be non-negative")
        if not 0 <= self.nms_iou <= 1:
            raise InvalidParameter("nms_iou must be in [0, 1]")
        if self.connectivity not in _STRUCTURES:
            raise InvalidParameter("connectivity must be 4 or 8")

    def to_dict(self) -> dict:
        return asdict(self)


def propose_regions(
    ela: ElaResult,
    percentile: float = DEFAULT_PERCENTILE,
    min_area: float = DEFAULT_MIN_AREA,
    connectivity: int = 4,
) -> list[BBox]:
    """Boxes around connected groups of blocks scoring above ``percentile``.

    Blocks strictly above the percentile threshold are grouped with 4- or
    8-connectivity; each group's pixel extent, clipped to the image, is kept
    when its area reaches ``min_area``.  Boxes come out in label order
    (raster order of each group's first block).
    """
    scores = ela.block_scores
    threshold = np.percentile(scores, percentile)
    labels, n = ndimage.label(scores > threshold, structure=_STRUCTURES[connectivity])
    boxes = []
    for rows, cols in ndimage.find_objects(labels):
        box = BBox(cols.start * BLOCK, rows.start * BLOCK, cols.stop * BLOCK, rows.stop * BLOCK)
        box = box.clip(ela.width, ela.height)
        if box is not None and box.area >= min_area:
            boxes.append(box)
    return boxes


def _pixel_slices(box: BBox) -> tuple[slice, slice]:
    return (slice(math.floor(box.y1), math.ceil(box.y2)), slice(math.floor(box.x1), math.ceil(box.x2)))


def score_region(ela: ElaResult, box: BBox) -> float:
    if not box.within(ela.width, ela.height):
        raise OutOfBounds(f"box {box} outside {ela.width}x{ela.height} image")
    diff = ela.diff.astype(np.float64)
    inside = np.zeros(diff.shape, dtype=bool)
    inside[_pixel_slices(box)] = True
    n_out = diff.size - int(inside.sum())
    if n_out == 0:
        return 0.0
    contrast = (diff[inside].mean() - diff[~inside].mean()) / 255.0
    return float(min(1.0, max(0.0, contrast)))


def detect_tampering(img: ImageBuffer, params: DetectParams = DetectParams()) -> list[Detection]:
    ela = compute_ela(img, params.quality, params.scale)
    boxes = propose_regions(ela, params.percentile, params.min_area, params.connectivity)
    scored = [(b, score_region(ela, b)) for b in boxes]
    return [Detection(b, s) for b, s in nms(scored, params.nms_iou)]


def detections_record(image_path: str, dets: Sequence[Detection]) -> dict:
    return {"image_path": image_path, "detections": [d.to_dict() for d in dets]}


def write_detections(path: PathLike, records: Iterable[tuple[str, Sequence[Detection]]]) -> None:
    lines = [json.dumps(detections_record(p, d)) + "\n" for p, d in records]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_detections(path: PathLike) -> dict[str, list[Detection]]:
    """Parse a detections JSON-lines file into ``{image_path: detections}``.

    Repeated image paths are concatenated in file order.
    """
    out: dict[str, list[Detection]] = {}
    for lineno, obj in read_jsonl(path):
        try:
            image_path = obj["image_path"]
            if not isinstance(image_path, str):
                raise InvalidParameter("image_path must be a string")
            dets = obj.get("detections", [])
            if not isinstance(dets, list):
                raise InvalidParameter("detections must be a list")
            parsed = [Detection.from_dict(d) for d in dets]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), lineno, f"bad detection record: {exc}") from exc
        out.setdefault(image_path, []).extend(parsed)
    return out
