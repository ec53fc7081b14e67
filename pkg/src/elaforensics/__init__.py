"""Error Level Analysis toolkit for spliced-image localization."""

__version__ = "0.1.0"

from .geometry import AnchorConfig, BBox, RegressionTarget, decode_box, encode_box, generate_anchors, iou, nms
from .imaging import ElaResult, ImageBuffer, compute_ela, encode_jpeg, load_image, to_jpeg_domain

__all__ = [
    "AnchorConfig",
    "BBox",
    "ElaResult",
    "ImageBuffer",
    "RegressionTarget",
    "compute_ela",
    "decode_box",
    "encode_box",
    "encode_jpeg",
    "generate_anchors",
    "iou",
    "load_image",
    "nms",
    "to_jpeg_domain",
]
