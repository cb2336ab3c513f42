"""Hyperstroke: alpha-stroke representation toolkit for assistive drawing."""

from .raster import (
    AlphaImage,
    BBox,
    BBoxTokens,
    BoundsError,
    Canvas,
    GridSpec,
    Hyperstroke,
    ShapeError,
    blend,
    compose,
    crop_and_resize,
    diff_bbox,
    snap_box,
    unsnap_box,
)

__all__ = [
    "AlphaImage",
    "BBox",
    "BBoxTokens",
    "BoundsError",
    "Canvas",
    "GridSpec",
    "Hyperstroke",
    "ShapeError",
    "blend",
    "compose",
    "crop_and_resize",
    "diff_bbox",
    "snap_box",
    "unsnap_box",
]

__version__ = "0.1.0"
