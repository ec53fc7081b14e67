"""Image buffers, the pinned JPEG codec, and Error Level Analysis.

The codec is Pillow's libjpeg binding in one fixed configuration:
baseline sequential, 4:4:4 chroma (no subsampling), no Huffman
optimisation, and the standard IJG quantisation tables scaled by quality.
Every frozen bound in the test suite refers to this configuration.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImage, EncodeFailure, ImageNotFound, InvalidParameter, UnsupportedFormat

PathLike = Union[str, Path]

RGB8 = "RGB8"
GRAY8 = "Gray8"
_CHANNELS = {RGB8: 3, GRAY8: 1}

BLOCK = 8
DEFAULT_ELA_QUALITY = 90
DEFAULT_CONVERSION_QUALITY = 95
DEFAULT_SCALE = 10.0

# Pillow's "4:4:4"; changing any of these invalidates the frozen codec bounds.
_JPEG_OPTIONS = dict(subsampling=0, optimize=False, progressive=False)

_JPEG_MAGIC = b"\xff\xd8"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster held as a read-only ``(height, width, channels)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidParameter(f"expected (H, W, 1|3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidParameter("image must be at least 1x1")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and (arr.min() < 0 or arr.max() > 255):
                raise InvalidParameter("pixel values must lie in [0, 255]")
            if not np.issubdtype(arr.dtype, np.integer):
                raise InvalidParameter(f"pixels must be integers, got {arr.dtype}")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_bytes(cls, width: int, height: int, mode: str, data: bytes) -> "ImageBuffer":
        if mode not in _CHANNELS:
            raise InvalidParameter(f"unknown pixel format {mode!r}")
        c = _CHANNELS[mode]
        if len(data) != width * height * c:
            raise InvalidParameter(
                f"data length {len(data)} != {width}*{height}*{c}"
            )
        arr = np.frombuffer(bytes(data), dtype=np.uint8).reshape(height, width, c)
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def mode(self) -> str:
        return RGB8 if self.pixels.shape[2] == 3 else GRAY8

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.data))

    def to_pil(self) -> Image.Image:
        if self.mode == GRAY8:
            return Image.fromarray(self.pixels[:, :, 0], mode="L")
        return Image.fromarray(self.pixels, mode="RGB")


def validate_quality(q) -> int:
    """Return ``q`` as an int, raising if it is not a JPEG quality in [1, 100]."""
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise InvalidParameter(f"JPEG quality must be an integer, got {q!r}")
    if not 1 <= int(q) <= 100:
        raise InvalidParameter(f"JPEG quality must be in [1, 100], got {q}")
    return int(q)


def _sniff(path: Path) -> str | None:
    with path.open("rb") as fh:
        head = fh.read(8)
    if head.startswith(_JPEG_MAGIC):
        return "JPEG"
    if head.startswith(_PNG_MAGIC):
        return "PNG"
    return None


def _to_rgb8(im: Image.Image) -> np.ndarray:
    if im.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise UnsupportedFormat(f"only 8-bit images are supported, got mode {im.mode}")
    if im.mode == "L":
        grey = np.asarray(im, dtype=np.uint8)
        return np.repeat(grey[:, :, None], 3, axis=2)
    return np.asarray(im.convert("RGB"), dtype=np.uint8)


def read_image(path: PathLike) -> tuple[ImageBuffer, str]:
    """Load ``path`` and also report its container format (``"JPEG"`` or ``"PNG"``)."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"no such image file: {path}")
    sniffed = _sniff(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in ("JPEG", "PNG"):
                raise UnsupportedFormat(f"{path}: unsupported format {fmt}")
            im.load()
            arr = _to_rgb8(im)
    except UnidentifiedImageError as exc:
        if sniffed is not None:
            raise CorruptImage(f"{path}: cannot decode {sniffed} data") from exc
        raise UnsupportedFormat(f"{path}: not a JPEG or PNG file") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return ImageBuffer(arr), fmt


def load_image(path: PathLike) -> ImageBuffer:
    """Decode a JPEG or PNG file to RGB8; greyscale sources are replicated to three channels."""
    return read_image(path)[0]


def save_png(img: ImageBuffer, path: PathLike) -> None:
    img.to_pil().save(Path(path), format="PNG")


def encode_jpeg(img: ImageBuffer, q: int) -> bytes:
    q = validate_quality(q)
    if img.mode != RGB8:
        raise InvalidParameter("encode_jpeg expects an RGB8 buffer")
    buf = io.BytesIO()
    try:
        img.to_pil().save(buf, format="JPEG", quality=q, **_JPEG_OPTIONS)
    except (OSError, ValueError) as exc:
        raise EncodeFailure(str(exc)) from exc
    return buf.getvalue()


def decode_jpeg(data: bytes) -> ImageBuffer:
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "JPEG":
                raise CorruptImage(f"expected JPEG data, got {im.format}")
            im.load()
            return ImageBuffer(_to_rgb8(im))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImage(f"cannot decode JPEG stream: {exc}") from exc


def write_jpeg(img: ImageBuffer, path: PathLike, q: int) -> None:
    Path(path).write_bytes(encode_jpeg(img, q))


def to_jpeg_domain(img: ImageBuffer, q0: int = DEFAULT_CONVERSION_QUALITY) -> ImageBuffer:
    """Place a losslessly-decoded image in the JPEG domain by one encode/decode pass."""
    return decode_jpeg(encode_jpeg(img, q0))


def load_for_ela(path: PathLike, q0: int = DEFAULT_CONVERSION_QUALITY) -> ImageBuffer:
    """Load an image, converting non-JPEG sources to the JPEG domain at ``q0``."""
    img, fmt = read_image(path)
    if fmt != "JPEG":
        img = to_jpeg_domain(img, q0)
    return img


def block_grid(diff: np.ndarray, block: int = BLOCK) -> np.ndarray:
    """Mean of ``diff`` over each ``block`` x ``block`` cell.

    The result has shape ``(ceil(h / block), ceil(w / block))`` (row = y).
    Partial cells on the right and bottom edges average over the pixels
    they actually cover.
    """
    diff = np.asarray(diff)
    if diff.ndim != 2 or diff.shape[0] < 1 or diff.shape[1] < 1:
        raise InvalidParameter(f"diff must be a non-empty 2-D map, got shape {diff.shape}")
    h, w = diff.shape
    rows, cols = -(-h // block), -(-w // block)
    padded = np.zeros((rows * block, cols * block), dtype=np.float64)
    padded[:h, :w] = diff
    sums = padded.reshape(rows, block, cols, block).sum(axis=(1, 3))
    row_n = np.minimum(block, h - block * np.arange(rows))
    col_n = np.minimum(block, w - block * np.arange(cols))
    return sums / np.outer(row_n, col_n)


def heatmap_from_diff(diff: np.ndarray, scale: float = DEFAULT_SCALE) -> ImageBuffer:
    if not scale > 0:
        raise InvalidParameter(f"scale must be positive, got {scale}")
    amplified = np.floor(np.asarray(diff, dtype=np.float64) * scale + 0.5)
    return ImageBuffer(np.minimum(amplified, 255).astype(np.uint8))


@dataclass(frozen=True, eq=False)
class ElaResult:
    diff: np.ndarray
    block_scores: np.ndarray
    heatmap: ImageBuffer
    quality: int
    scale: float

    @property
    def width(self) -> int:
        return self.diff.shape[1]

    @property
    def height(self) -> int:
        return self.diff.shape[0]

    def blocks_json(self) -> str:
        return json.dumps(self.block_scores.tolist())

    def summary(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "quality": self.quality,
            "scale": self.scale,
            "max_block_score": float(self.block_scores.max()),
            "mean_block_score": float(self.block_scores.mean()),
        }


def ela_diff(original: ImageBuffer, recompressed: ImageBuffer) -> np.ndarray:
    """Per-pixel absolute difference, reduced over channels by a rounded mean."""
    if original.pixels.shape != recompressed.pixels.shape:
        raise InvalidParameter("images must share shape")
    a = original.pixels.astype(np.int32)
    b = recompressed.pixels.astype(np.int32)
    total = np.abs(a - b).sum(axis=2)
    c = original.pixels.shape[2]
    # round-half-up of total / c in integer arithmetic
    return ((2 * total + c) // (2 * c)).astype(np.uint8)


def compute_ela(
    img: ImageBuffer, q: int = DEFAULT_ELA_QUALITY, scale: float = DEFAULT_SCALE
) -> ElaResult:
    """Error Level Analysis of an image already in the JPEG domain.

    The image is re-encoded at quality ``q`` and decoded again; the absolute
    difference against the input, averaged over channels, is the error map.
    Block scores and an amplified greyscale heatmap are derived from it.
    """
    q = validate_quality(q)
    if not scale > 0:
        raise InvalidParameter(f"scale must be positive, got {scale}")
    if img.mode != RGB8:
        raise InvalidParameter("compute_ela expects an RGB8 buffer")
    recompressed = decode_jpeg(encode_jpeg(img, q))
    diff = ela_diff(img, recompressed)
    diff.setflags(write=False)
    scores = block_grid(diff)
    scores.setflags(write=False)
    return ElaResult(diff, scores, heatmap_from_diff(diff, scale), q, float(scale))
