"""Model-free stroke algebra: alpha blending, grid snapping, box tokens, raster I/O.

Pixels are stored as float64 rasters in [0, 1] everywhere inside the package;
8-bit conversion happens only at the PNG boundary and rounds half up. Alpha is
straight (non-premultiplied): applying a stroke computes

    out = rgb * alpha + canvas * (1 - alpha)

inside the stroke's half-open box [x1, x2) x [y1, y2) and leaves the canvas
untouched outside it. Every function here is pure: inputs are never mutated
and results are freshly allocated, so concurrent callers need no locking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image


class BoundsError(ValueError):
    """A box reaches outside the raster it is applied to."""


class ShapeError(ValueError):
    """Raster dimensions disagree with what an operation requires."""


def _check_unit_range(arr: np.ndarray, name: str) -> None:
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")


@dataclass(frozen=True)
class Canvas:
    """RGB drawing surface, shape (H, W, 3), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeError(f"canvas must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeError("canvas must be at least 1x1")
        _check_unit_range(px, "canvas")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @staticmethod
    def blank(width: int, height: int, color=(1.0, 1.0, 1.0)) -> "Canvas":
        px = np.empty((height, width, 3), dtype=np.float64)
        px[:] = np.asarray(color, dtype=np.float64)
        return Canvas(px)


@dataclass(frozen=True)
class AlphaImage:
    """Stroke appearance: rgb (h, w, 3) plus straight alpha (h, w), all in [0, 1]."""

    rgb: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float64)
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim == 3 and alpha.shape[2] == 1:
            alpha = alpha[:, :, 0]
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ShapeError(f"rgb must be (h, w, 3), got {rgb.shape}")
        if alpha.shape != rgb.shape[:2]:
            raise ShapeError(
                f"alpha shape {alpha.shape} does not match rgb {rgb.shape[:2]}"
            )
        _check_unit_range(rgb, "rgb")
        _check_unit_range(alpha, "alpha")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "alpha", alpha)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def rgba(self) -> np.ndarray:
        """Pack into (h, w, 4)."""
        return np.concatenate([self.rgb, self.alpha[:, :, None]], axis=2)

    @staticmethod
    def from_rgba(rgba: np.ndarray) -> "AlphaImage":
        rgba = np.asarray(rgba, dtype=np.float64)
        if rgba.ndim != 3 or rgba.shape[2] != 4:
            raise ShapeError(f"expected (h, w, 4), got {rgba.shape}")
        return AlphaImage(rgb=rgba[:, :, :3], alpha=rgba[:, :, 3])


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box [x1, x2) x [y1, y2)."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if int(v) != v:
                raise ValueError("box coordinates must be integers")
        object.__setattr__(self, "x1", int(self.x1))
        object.__setattr__(self, "y1", int(self.y1))
        object.__setattr__(self, "x2", int(self.x2))
        object.__setattr__(self, "y2", int(self.y2))
        if not (0 <= self.x1 < self.x2 and 0 <= self.y1 < self.y2):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def contains(self, other: "BBox") -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and self.x2 >= other.x2
            and self.y2 >= other.y2
        )


@dataclass(frozen=True)
class Hyperstroke:
    """Atomic drawing unit: an alpha image grounded by a canvas-space box.

    The image either matches the box dimensions exactly, or carries a
    declared working resolution (``resized=True``, e.g. a decoded patch at
    the tokenizer's native size) in which case it is resampled to the box
    dimensions when applied.
    """

    image: AlphaImage
    box: BBox
    resized: bool = False

    def __post_init__(self):
        if not self.resized and (
            self.image.width != self.box.width or self.image.height != self.box.height
        ):
            raise ShapeError(
                f"stroke image {self.image.width}x{self.image.height} does not "
                f"match box {self.box.width}x{self.box.height}; pass resized=True "
                "for strokes stored at a working resolution"
            )


@dataclass(frozen=True)
class GridSpec:
    """C x C token grid over a W x H canvas; W and H must be divisible by C."""

    width: int
    height: int
    grid_c: int = 16

    def __post_init__(self):
        if self.grid_c < 1:
            raise ValueError("grid count must be >= 1")
        if self.width % self.grid_c or self.height % self.grid_c:
            raise ValueError(
                f"canvas {self.width}x{self.height} not divisible by C={self.grid_c}"
            )

    @property
    def cell_width(self) -> int:
        return self.width // self.grid_c

    @property
    def cell_height(self) -> int:
        return self.height // self.grid_c


@dataclass(frozen=True)
class BBoxTokens:
    """Grid-corner indices (X1, Y1, X2, Y2), each in {0..C}."""

    x1: int
    y1: int
    x2: int
    y2: int
    grid_c: int = 16

    def __post_init__(self):
        c = self.grid_c
        if not (0 <= self.x1 < self.x2 <= c and 0 <= self.y1 < self.y2 <= c):
            raise ValueError(f"invalid box tokens {self} for C={c}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


def resize_bilinear(array: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resample of an (h, w[, c]) float raster to (height, width)."""
    if array.shape[0] == height and array.shape[1] == width:
        return array.copy()
    out = cv2.resize(
        array.astype(np.float64), (width, height), interpolation=cv2.INTER_LINEAR
    )
    return np.clip(out, 0.0, 1.0)


def _resample_stroke(stroke: Hyperstroke) -> AlphaImage:
    """Stroke appearance at box resolution; alpha resampled exactly like rgb."""
    if stroke.image.width == stroke.box.width and stroke.image.height == stroke.box.height:
        return stroke.image
    rgba = resize_bilinear(stroke.image.rgba(), stroke.box.width, stroke.box.height)
    return AlphaImage.from_rgba(rgba)


def blend(canvas: Canvas, stroke: Hyperstroke) -> Canvas:
    """Apply one stroke: convex per-pixel mix inside the box, passthrough outside."""
    box = stroke.box
    if box.x2 > canvas.width or box.y2 > canvas.height:
        raise BoundsError(
            f"box {box.as_tuple()} exceeds canvas {canvas.width}x{canvas.height}"
        )
    image = _resample_stroke(stroke)
    out = canvas.pixels.copy()
    region = out[box.y1 : box.y2, box.x1 : box.x2]
    a = image.alpha[:, :, None]
    out[box.y1 : box.y2, box.x1 : box.x2] = image.rgb * a + region * (1.0 - a)
    return Canvas(out)


def compose(canvas: Canvas, strokes) -> Canvas:
    """Left-fold of blend over an ordered stroke list; empty list is identity."""
    out = canvas
    for i, stroke in enumerate(strokes):
        try:
            out = blend(out, stroke)
        except (BoundsError, ShapeError) as exc:
            raise type(exc)(f"stroke {i}: {exc}") from exc
    return out


def snap_box(box: BBox, grid: GridSpec) -> BBoxTokens:
    """Smallest grid-aligned box containing ``box``, as grid-corner tokens."""
    if box.x2 > grid.width or box.y2 > grid.height:
        raise BoundsError(f"box {box.as_tuple()} outside {grid.width}x{grid.height}")
    c, w, h = grid.grid_c, grid.width, grid.height
    return BBoxTokens(
        x1=box.x1 * c // w,
        y1=box.y1 * c // h,
        x2=-(-box.x2 * c // w),
        y2=-(-box.y2 * c // h),
        grid_c=c,
    )


def unsnap_box(tokens: BBoxTokens, grid: GridSpec) -> BBox:
    """Pixel-space box of a token box (exact inverse on grid-aligned boxes)."""
    if tokens.grid_c != grid.grid_c:
        raise ValueError(f"token grid C={tokens.grid_c} != grid C={grid.grid_c}")
    return BBox(
        x1=tokens.x1 * grid.width // grid.grid_c,
        y1=tokens.y1 * grid.height // grid.grid_c,
        x2=tokens.x2 * grid.width // grid.grid_c,
        y2=tokens.y2 * grid.height // grid.grid_c,
    )


def crop_and_resize(
    frame_a: Canvas,
    frame_b: Canvas,
    tokens: BBoxTokens,
    target: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray]:
    """Crop both frames to the token box and resample to ``target`` (W, H)."""
    if frame_a.pixels.shape != frame_b.pixels.shape:
        raise ShapeError("frames must share dimensions")
    grid = GridSpec(frame_a.width, frame_a.height, tokens.grid_c)
    box = unsnap_box(tokens, grid)
    tw, th = target
    out = []
    for frame in (frame_a, frame_b):
        patch = frame.pixels[box.y1 : box.y2, box.x1 : box.x2]
        out.append(resize_bilinear(patch, tw, th))
    return out[0], out[1]


def diff_bbox(frame_a: Canvas, frame_b: Canvas, threshold: float = 2.0 / 255.0):
    """Tight box over pixels whose max-channel |B - A| exceeds ``threshold``.

    Returns None when no pixel changes more than the threshold.
    """
    if frame_a.pixels.shape != frame_b.pixels.shape:
        raise ShapeError(
            f"frame shapes differ: {frame_a.pixels.shape} vs {frame_b.pixels.shape}"
        )
    delta = np.abs(frame_b.pixels - frame_a.pixels).max(axis=2)
    ys, xs = np.nonzero(delta > threshold)
    if ys.size == 0:
        return None
    return BBox(
        x1=int(xs.min()), y1=int(ys.min()), x2=int(xs.max()) + 1, y2=int(ys.max()) + 1
    )


def support_bbox(alpha: np.ndarray):
    """Tight box over alpha > 0, or None for an empty mask."""
    ys, xs = np.nonzero(np.asarray(alpha) > 0.0)
    if ys.size == 0:
        return None
    return BBox(
        x1=int(xs.min()), y1=int(ys.min()), x2=int(xs.max()) + 1, y2=int(ys.max()) + 1
    )


# ---------------------------------------------------------------------------
# 8-bit PNG boundary


def to_u8(array: np.ndarray) -> np.ndarray:
    """[0, 1] float -> uint8, rounding half up (0.5/255 maps to 1, not 0)."""
    return np.floor(np.clip(array, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_u8(array: np.ndarray) -> np.ndarray:
    return array.astype(np.float64) / 255.0


def write_canvas_png(canvas: Canvas, path) -> None:
    Image.fromarray(to_u8(canvas.pixels), mode="RGB").save(path, format="PNG")


def read_canvas_png(path) -> Canvas:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    return Canvas(from_u8(arr))


def canvas_png_bytes(canvas: Canvas) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(to_u8(canvas.pixels), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def canvas_from_png_bytes(data: bytes) -> Canvas:
    import io

    with Image.open(io.BytesIO(data)) as img:
        arr = np.asarray(img.convert("RGB"))
    return Canvas(from_u8(arr))


def write_alpha_png(image: AlphaImage, path) -> None:
    Image.fromarray(to_u8(image.rgba()), mode="RGBA").save(path, format="PNG")


def read_alpha_png(path) -> AlphaImage:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGBA"))
    return AlphaImage.from_rgba(from_u8(arr))


def alpha_png_bytes(image: AlphaImage) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(to_u8(image.rgba()), mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def write_hyperstroke(stroke: Hyperstroke, png_path, grid_c: int = 16) -> None:
    """RGBA PNG plus a sidecar JSON recording box placement and grid count."""
    png_path = Path(png_path)
    write_alpha_png(stroke.image, png_path)
    sidecar = {"box": list(stroke.box.as_tuple()), "grid_c": grid_c}
    png_path.with_suffix(".json").write_text(json.dumps(sidecar))


def read_hyperstroke(png_path) -> Hyperstroke:
    png_path = Path(png_path)
    image = read_alpha_png(png_path)
    meta = json.loads(png_path.with_suffix(".json").read_text())
    box = BBox(*meta["box"])
    resized = image.width != box.width or image.height != box.height
    return Hyperstroke(image=image, box=box, resized=resized)
