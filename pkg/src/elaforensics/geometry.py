"""Axis-aligned box algebra: IoU, anchors, regression targets and NMS.

Coordinates are pixels with x to the right, y downward and the origin at
the top-left corner.  Areas are continuous (``(x2 - x1) * (y2 - y1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise InvalidParameter(f"box must have positive area: {self}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    @classmethod
    def from_dict(cls, d: dict) -> "BBox":
        return cls(d["x1"], d["y1"], d["x2"], d["y2"])

    def to_dict(self) -> dict:
        return {"x1": self.x1, "y1": self.y1, "x2": self.x2, "y2": self.y2}

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2])

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def within(self, width: float, height: float) -> bool:
        return self.x1 >= 0 and self.y1 >= 0 and self.x2 <= width and self.y2 <= height

    def clip(self, width: float, height: float) -> "BBox | None":
        """Intersection with the image rectangle, or None when it is empty."""
        x1, y1 = max(self.x1, 0.0), max(self.y1, 0.0)
        x2, y2 = min(self.x2, float(width)), min(self.y2, float(height))
        if x2 <= x1 or y2 <= y1:
            return None
        return BBox(x1, y1, x2, y2)


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between ``(n, 4)`` and ``(m, 4)`` corner arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


@dataclass(frozen=True)
class AnchorConfig:
    stride: int = 16
    scales: tuple[float, ...] = (32.0, 64.0, 128.0)
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0)  # height / width

    def __post_init__(self):
        if self.stride < 1:
            raise InvalidParameter("stride must be >= 1")
        if not self.scales or not self.ratios:
            raise InvalidParameter("scales and ratios must be non-empty")
        if any(s <= 0 for s in self.scales) or any(r <= 0 for r in self.ratios):
            raise InvalidParameter("scales and ratios must be positive")
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))


def generate_anchors(img_w: int, img_h: int, cfg: AnchorConfig = AnchorConfig()) -> list[BBox]:
    """One anchor per (grid cell, scale, ratio), in row-major cell order.

    Anchors are not clipped; use :func:`anchor_inside_flags` to find the ones
    that cross the image border.
    """
    if img_w < cfg.stride or img_h < cfg.stride:
        raise InvalidParameter("image must be at least one stride in each dimension")
    nx, ny = img_w // cfg.stride, img_h // cfg.stride
    anchors = []
    for j in range(ny):
        cy = (j + 0.5) * cfg.stride
        for i in range(nx):
            cx = (i + 0.5) * cfg.stride
            for scale in cfg.scales:
                for ratio in cfg.ratios:
                    root = math.sqrt(ratio)
                    anchors.append(BBox.from_center(cx, cy, scale / root, scale * root))
    return anchors


def anchor_inside_flags(anchors: Sequence[BBox], img_w: float, img_h: float) -> np.ndarray:
    return np.array([a.within(img_w, img_h) for a in anchors], dtype=bool)


@dataclass(frozen=True)
class RegressionTarget:
    tx: float
    ty: float
    tw: float
    th: float

    def as_array(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tw, self.th])

    @classmethod
    def from_array(cls, v: Iterable[float]) -> "RegressionTarget":
        tx, ty, tw, th = (float(x) for x in v)
        return cls(tx, ty, tw, th)


def encode_box(gt: BBox, anchor: BBox) -> RegressionTarget:
    gx, gy = gt.center
    ax, ay = anchor.center
    return RegressionTarget(
        (gx - ax) / anchor.width,
        (gy - ay) / anchor.height,
        math.log(gt.width / anchor.width),
        math.log(gt.height / anchor.height),
    )


def decode_box(t: RegressionTarget, anchor: BBox) -> BBox:
    ax, ay = anchor.center
    cx = ax + t.tx * anchor.width
    cy = ay + t.ty * anchor.height
    return BBox.from_center(cx, cy, anchor.width * math.exp(t.tw), anchor.height * math.exp(t.th))


def nms(dets: Sequence[tuple[BBox, float]], iou_threshold: float) -> list[tuple[BBox, float]]:
    """Greedy non-maximum suppression.

    Candidates are visited by descending score, ties resolved by lower input
    index.  A candidate is dropped when its IoU with any kept box exceeds
    ``iou_threshold``.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise InvalidParameter(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    if not dets:
        return []
    scores = np.array([float(s) for _, s in dets])
    order = sorted(range(len(dets)), key=lambda i: (-scores[i], i))
    boxes = np.array([b.as_array() for b, _ in dets])[order]
    overlaps = iou_matrix(boxes, boxes)
    alive = np.ones(len(order), dtype=bool)
    kept = []
    for k in range(len(order)):
        if not alive[k]:
            continue
        kept.append(order[k])
        alive[k + 1:] &= ~(overlaps[k, k + 1:] > iou_threshold)
    return [dets[i] for i in kept]
