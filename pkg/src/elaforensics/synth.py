"""Synthetic splice generation with ground-truth boxes.

An object is cut from a source image by its bounding box and pasted, by
pure translation, into a target image.  The composite is written as JPEG,
so the pasted pixels carry the source's compression history inside a host
with a different one.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import EmptyCorpus, InvalidParameter, NoAdmissiblePlacement, OutOfBounds, ParseError
from .geometry import BBox
from .imaging import ImageBuffer, PathLike, encode_jpeg, load_image, validate_quality

ANNOTATIONS_FILE = "annotations.jsonl"
MANIFEST_FILE = "manifest.json"
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
DEFAULT_QUALITY = 95
MAX_RETRIES = 100


@dataclass(frozen=True)
class LabeledBox:
    box: BBox
    label: str | None = None

    def to_dict(self) -> dict:
        d = self.box.to_dict()
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledBox":
        label = d.get("label")
        if label is not None and not isinstance(label, str):
            raise InvalidParameter("label must be a string")
        return cls(BBox.from_dict(d), label)


@dataclass(frozen=True)
class Annotation:
    """One image record of the JSON-lines annotation format.

    Ground truth requires ``tampered=False`` images to carry no boxes; source
    corpora reuse the format with object boxes on untampered images, so that
    rule is checked by :meth:`check_ground_truth` rather than on construction.
    """

    image_path: str
    width: int
    height: int
    tampered: bool
    boxes: tuple[LabeledBox, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.width < 1 or self.height < 1:
            raise InvalidParameter("image dimensions must be positive")
        for lb in self.boxes:
            if not lb.box.within(self.width, self.height):
                raise OutOfBounds(f"{self.image_path}: box {lb.box} outside {self.width}x{self.height}")

    def check_ground_truth(self) -> None:
        if not self.tampered and self.boxes:
            raise InvalidParameter(f"{self.image_path}: untampered image must not carry boxes")

    def to_dict(self) -> dict:
        return {
            "image_path": self.image_path,
            "width": self.width,
            "height": self.height,
            "tampered": self.tampered,
            "boxes": [b.to_dict() for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        if not isinstance(d.get("image_path"), str):
            raise InvalidParameter("image_path must be a string")
        if not isinstance(d.get("tampered"), bool):
            raise InvalidParameter("tampered must be a boolean")
        for key in ("width", "height"):
            if isinstance(d.get(key), bool) or not isinstance(d.get(key), int):
                raise InvalidParameter(f"{key} must be an integer")
        boxes = d.get("boxes", [])
        if not isinstance(boxes, list):
            raise InvalidParameter("boxes must be a list")
        return cls(d["image_path"], d["width"], d["height"], d["tampered"],
                   tuple(LabeledBox.from_dict(b) for b in boxes))


def read_jsonl(path: PathLike) -> Iterable[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each non-blank line."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(str(path), lineno, "expected a JSON object")
            yield lineno, obj


def read_annotations(path: PathLike, ground_truth: bool = True) -> list[Annotation]:
    out = []
    for lineno, obj in read_jsonl(path):
        try:
            ann = Annotation.from_dict(obj)
            if ground_truth:
                ann.check_ground_truth()
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), lineno, f"bad annotation: {exc}") from exc
        out.append(ann)
    return out


def dumps_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)


def write_annotations(path: PathLike, annotations: Iterable[Annotation]) -> None:
    Path(path).write_text(dumps_jsonl(a.to_dict() for a in annotations), encoding="utf-8")


def pixel_box(box: BBox) -> tuple[int, int, int, int]:
    """Smallest integer rectangle covering ``box``."""
    return math.floor(box.x1), math.floor(box.y1), math.ceil(box.x2), math.ceil(box.y2)


@dataclass(frozen=True)
class SpliceRecipe:
    source_image: str
    source_box: BBox
    target_image: str
    paste_origin: tuple[int, int]
    rng_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "source_image": self.source_image,
            "source_box": self.source_box.to_dict(),
            "target_image": self.target_image,
            "paste_origin": list(self.paste_origin),
            "rng_seed": self.rng_seed,
        }


def paste(target: ImageBuffer, source: ImageBuffer, source_box: BBox, origin: tuple[int, int]) -> tuple[ImageBuffer, BBox]:
    """Copy the ``source_box`` crop of ``source`` into ``target`` at ``origin``."""
    x1, y1, x2, y2 = pixel_box(source_box)
    if x1 < 0 or y1 < 0 or x2 > source.width or y2 > source.height:
        raise OutOfBounds(f"source box {source_box} outside {source.width}x{source.height} source")
    ox, oy = int(origin[0]), int(origin[1])
    w, h = x2 - x1, y2 - y1
    if ox < 0 or oy < 0 or ox + w > target.width or oy + h > target.height:
        raise OutOfBounds(
            f"pasted box ({ox},{oy},{ox + w},{oy + h}) exceeds {target.width}x{target.height} target"
        )
    if target.mode != source.mode:
        raise InvalidParameter("source and target must share a pixel format")
    out = np.array(target.pixels)
    out[oy:oy + h, ox:ox + w] = source.pixels[y1:y2, x1:x2]
    return ImageBuffer(out), BBox(ox, oy, ox + w, oy + h)


def splice(recipe: SpliceRecipe, image_path: str = "", label: str | None = None) -> tuple[ImageBuffer, Annotation]:
    source = load_image(recipe.source_image)
    target = load_image(recipe.target_image)
    img, box = paste(target, source, recipe.source_box, recipe.paste_origin)
    ann = Annotation(image_path, img.width, img.height, True, (LabeledBox(box, label),))
    return img, ann


@dataclass(frozen=True)
class AreaConstraints:
    min_area_frac: float = 0.01
    max_area_frac: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.min_area_frac <= self.max_area_frac <= 1.0:
            raise InvalidParameter(
                f"need 0 <= min_area_frac <= max_area_frac <= 1, got "
                f"{self.min_area_frac}, {self.max_area_frac}"
            )


@dataclass(frozen=True)
class _SourceObject:
    image: str  # relative to the sources directory
    box: BBox
    label: str | None

    @property
    def size(self) -> tuple[int, int]:
        x1, y1, x2, y2 = pixel_box(self.box)
        return x2 - x1, y2 - y1


def _list_images(directory: Path) -> list[str]:
    return sorted(p.name for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        return im.size


@dataclass
class SplicePlanner:
    """Chooses (object, target, origin) triples uniformly among admissible ones.

    Each sample index gets its own generator seeded with ``seed ^ index``,
    so any subset of samples can be planned independently and in any order.
    """

    objects: Sequence[_SourceObject]
    target_names: Sequence[str]
    target_sizes: Sequence[tuple[int, int]]
    constraints: AreaConstraints = field(default_factory=AreaConstraints)
    seed: int = 0
    max_retries: int = MAX_RETRIES

    def __post_init__(self):
        ow = np.array([o.size[0] for o in self.objects], dtype=np.int64)
        oh = np.array([o.size[1] for o in self.objects], dtype=np.int64)
        tw = np.array([s[0] for s in self.target_sizes], dtype=np.int64)
        th = np.array([s[1] for s in self.target_sizes], dtype=np.int64)
        frac = (ow[:, None] * oh[:, None]) / (tw[None, :] * th[None, :])
        fits = (ow[:, None] <= tw[None, :]) & (oh[:, None] <= th[None, :])
        ok = (
            fits
            & (frac >= self.constraints.min_area_frac)
            & (frac <= self.constraints.max_area_frac)
        )
        origins = np.where(ok, (tw[None, :] - ow[:, None] + 1) * (th[None, :] - oh[:, None] + 1), 0)
        self._origins = origins
        self._max_origins = max(int(origins.max()), 1)

    def plan(self, index: int) -> tuple[int, int, tuple[int, int]]:
        """Return ``(object_index, target_index, origin)`` for sample ``index``."""
        rng = np.random.default_rng(self.seed ^ index)
        n_obj, n_tgt = len(self.objects), len(self.target_names)
        for _ in range(self.max_retries):
            oi = int(rng.integers(n_obj))
            ti = int(rng.integers(n_tgt))
            n_origins = int(self._origins[oi, ti])
            # accept in proportion to the pair's origin count: uniform over triples
            if n_origins == 0 or rng.random() * self._max_origins >= n_origins:
                continue
            w, h = self.objects[oi].size
            tw, th = self.target_sizes[ti]
            ox = int(rng.integers(0, tw - w + 1))
            oy = int(rng.integers(0, th - h + 1))
            return oi, ti, (ox, oy)
        raise NoAdmissiblePlacement(index, self.max_retries)


def _relative_to(path: Path, base: Path) -> str:
    return Path(os.path.relpath(path.resolve(), base.resolve())).as_posix()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_source_objects(sources: Path) -> list[_SourceObject]:
    ann_path = sources / ANNOTATIONS_FILE
    if not sources.is_dir():
        raise EmptyCorpus(f"sources directory does not exist: {sources}")
    if not ann_path.is_file():
        raise EmptyCorpus(f"no {ANNOTATIONS_FILE} in {sources}")
    objects = []
    for ann in read_annotations(ann_path, ground_truth=False):
        for lb in ann.boxes:
            objects.append(_SourceObject(ann.image_path, lb.box, lb.label))
    if not objects:
        raise EmptyCorpus(f"no object boxes in {ann_path}")
    return objects


def generate_dataset(
    sources: PathLike,
    targets: PathLike,
    count: int,
    out: PathLike,
    constraints: AreaConstraints = AreaConstraints(),
    seed: int = 0,
    quality: int = DEFAULT_QUALITY,
    emit_originals: bool = False,
    max_retries: int = MAX_RETRIES,
) -> dict:
    """Write ``count`` spliced JPEGs, their annotations and a manifest under ``out``.

    ``sources`` must hold an ``annotations.jsonl`` whose boxes are the objects
    available for cutting; ``targets`` is a flat directory of host images.
    With ``emit_originals`` each host is also written untampered, at the same
    quality, under ``originals/``.  Returns the manifest dict.
    """
    if count < 1:
        raise InvalidParameter("count must be >= 1")
    if seed < 0:
        raise InvalidParameter("seed must be non-negative")
    quality = validate_quality(quality)
    sources, targets, out = Path(sources), Path(targets), Path(out)

    objects = load_source_objects(sources)
    if not targets.is_dir():
        raise EmptyCorpus(f"targets directory does not exist: {targets}")
    target_names = _list_images(targets)
    if not target_names:
        raise EmptyCorpus(f"no images in {targets}")
    planner = SplicePlanner(
        objects,
        target_names,
        [_image_size(targets / n) for n in target_names],
        constraints,
        seed,
        max_retries,
    )
    plans = [planner.plan(i) for i in range(count)]

    (out / "images").mkdir(parents=True, exist_ok=True)
    if emit_originals:
        (out / "originals").mkdir(parents=True, exist_ok=True)

    annotations: list[Annotation] = []
    samples = []
    for i, (oi, ti, origin) in enumerate(plans):
        obj = objects[oi]
        recipe = SpliceRecipe(str(sources / obj.image), obj.box, str(targets / target_names[ti]), origin, seed ^ i)
        rel = f"images/{i:05d}.jpg"
        img, ann = splice(recipe, rel, obj.label)
        data = encode_jpeg(img, quality)
        (out / rel).write_bytes(data)
        annotations.append(ann)
        sample = {
            "index": i,
            "image_path": rel,
            "sha256": _sha256(data),
            "recipe": {
                **recipe.to_dict(),
                "source_image": obj.image,
                "target_image": target_names[ti],
            },
        }
        if emit_originals:
            orig_rel = f"originals/{i:05d}.jpg"
            orig_data = encode_jpeg(load_image(recipe.target_image), quality)
            (out / orig_rel).write_bytes(orig_data)
            annotations.append(Annotation(orig_rel, img.width, img.height, False))
            sample["original_path"] = orig_rel
            sample["original_sha256"] = _sha256(orig_data)
        samples.append(sample)

    ann_text = dumps_jsonl(a.to_dict() for a in annotations)
    (out / ANNOTATIONS_FILE).write_text(ann_text, encoding="utf-8")
    manifest = {
        "generator": "elaforensics.synth",
        "config": {
            # relative to ``out`` so relocating a workspace leaves the manifest unchanged
            "sources": _relative_to(sources, out),
            "targets": _relative_to(targets, out),
            "count": count,
            "seed": seed,
            "min_area_frac": constraints.min_area_frac,
            "max_area_frac": constraints.max_area_frac,
            "quality": quality,
            "emit_originals": emit_originals,
            "max_retries": max_retries,
        },
        "annotations": ANNOTATIONS_FILE,
        "annotations_sha256": _sha256(ann_text.encode("utf-8")),
        "samples": samples,
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
