"""Procedural photo-like scenes for demo corpora and test fixtures.

A scene is a smooth illuminated background (gradient plus low-frequency
shading plus mild sensor noise) carrying a few textured ellipses and
rectangles.  Object bounding boxes are returned so scenes can serve as a
source corpus for :mod:`elaforensics.synth`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import BBox
from .imaging import ImageBuffer, PathLike, to_jpeg_domain, write_jpeg
from .synth import ANNOTATIONS_FILE, Annotation, LabeledBox, paste, write_annotations


def render_scene(
    rng: np.random.Generator,
    width: int = 256,
    height: int = 256,
    n_objects: int = 2,
    noise: float = 1.0,
) -> tuple[ImageBuffer, list[LabeledBox]]:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.empty((height, width, 3))
    for c in range(3):
        img[..., c] = (
            rng.uniform(60, 190)
            + rng.uniform(-40, 40) * xx / width
            + rng.uniform(-40, 40) * yy / height
        )
    shading = ndimage.gaussian_filter(rng.normal(size=(height, width)), max(width, height) / 8)
    shading *= 25.0 / max(np.abs(shading).max(), 1e-9)
    img += shading[..., None]

    objects = []
    for _ in range(n_objects):
        ow = int(rng.uniform(0.15, 0.45) * width)
        oh = int(rng.uniform(0.15, 0.45) * height)
        x0 = int(rng.integers(0, width - ow + 1))
        y0 = int(rng.integers(0, height - oh + 1))
        if rng.random() < 0.5:
            kind = "ellipse"
            mask = ((xx - (x0 + ow / 2)) / (ow / 2)) ** 2 + ((yy - (y0 + oh / 2)) / (oh / 2)) ** 2 <= 1
        else:
            kind = "rectangle"
            mask = (xx >= x0) & (xx < x0 + ow) & (yy >= y0) & (yy < y0 + oh)
        texture = ndimage.gaussian_filter(rng.normal(size=(height, width, 3)), (1.0, 1.0, 0))
        texture *= rng.uniform(8, 20) / max(texture.std(), 1e-9)
        fill = rng.uniform(20, 235, 3)[None, None, :] + texture
        img[mask] = fill[mask]
        ys, xs = np.nonzero(mask)
        objects.append(LabeledBox(BBox(xs.min(), ys.min(), xs.max() + 1, ys.max() + 1), kind))

    img += rng.normal(0.0, noise, img.shape)
    return ImageBuffer(np.clip(np.rint(img), 0, 255).astype(np.uint8)), objects


def write_corpus(
    root: PathLike,
    n_sources: int = 20,
    n_targets: int = 20,
    size: int = 256,
    seed: int = 0,
    source_quality: tuple[int, int] = (50, 75),
    target_quality: int = 95,
) -> tuple[Path, Path]:
    """Write ``root/sources`` (annotated JPEGs) and ``root/targets`` (host JPEGs).

    Source images are saved at a quality drawn from ``source_quality``; hosts
    are saved once at ``target_quality``, so any object moved from a source
    into a host lands with a lower-quality compression history.
    """
    root = Path(root)
    src_dir, tgt_dir = root / "sources", root / "targets"
    src_dir.mkdir(parents=True, exist_ok=True)
    tgt_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    annotations = []
    for i in range(n_sources):
        img, objects = render_scene(rng, size, size, n_objects=int(rng.integers(1, 4)))
        q = int(rng.integers(source_quality[0], source_quality[1] + 1))
        name = f"src_{i:04d}.jpg"
        write_jpeg(img, src_dir / name, q)
        annotations.append(Annotation(name, size, size, False, tuple(objects)))
    write_annotations(src_dir / ANNOTATIONS_FILE, annotations)
    for i in range(n_targets):
        img, _ = render_scene(rng, size, size, n_objects=int(rng.integers(0, 3)))
        write_jpeg(img, tgt_dir / f"tgt_{i:04d}.jpg", target_quality)
    return src_dir, tgt_dir


def quality_gap_splice(
    rng: np.random.Generator,
    size: int = 256,
    host_quality: int = 95,
    patch_quality: int = 60,
) -> tuple[ImageBuffer, BBox]:
    """A single in-memory splice with known compression history.

    The host is a scene compressed at ``host_quality``; the patch is an object
    box cut from a different scene compressed at ``patch_quality`` and pasted
    at a random origin.  The composite is compressed once more at
    ``host_quality`` and returned decoded, with the ground-truth box.
    """
    host, _ = render_scene(rng, size, size, n_objects=int(rng.integers(0, 3)))
    host = to_jpeg_domain(host, host_quality)
    src, objects = render_scene(rng, size, size, n_objects=1)
    src = to_jpeg_domain(src, patch_quality)
    box = objects[0].box
    w, h = int(box.width), int(box.height)
    origin = (int(rng.integers(0, size - w + 1)), int(rng.integers(0, size - h + 1)))
    spliced, gt = paste(host, src, box, origin)
    return to_jpeg_domain(spliced, host_quality), gt
