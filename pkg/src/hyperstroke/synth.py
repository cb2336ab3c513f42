"""Synthetic training data: Bezier strokes with ground-truth alpha over art crops.

Each sample is a (before, stroke, after) triple where ``after`` is obtained by
blending the ground-truth stroke onto the cropped source image, so the triple
carries exact supervision for the stroke decoder. Strokes are rasterized with
4x4 supersampled coverage, giving soft antialiased edges; the per-stroke base
opacity scales the coverage map into the final alpha channel.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import (
    AlphaImage,
    Canvas,
    Hyperstroke,
    blend,
    support_bbox,
    write_alpha_png,
    write_canvas_png,
)


@dataclass(frozen=True)
class SynthConfig:
    crop_size: int = 256
    width_range: tuple[float, float] = (2.0, 24.0)  # log-uniform, px
    opaque_fraction: float = 0.3
    opacity_range: tuple[float, float] = (0.1, 1.0)
    control_point_range: tuple[int, int] = (4, 4)
    color_policy: str = "mix"  # palette | uniform | mix
    samples_per_source: int = 8
    supersample: int = 4

    def __post_init__(self):
        if not 0.0 <= self.opaque_fraction <= 1.0:
            raise ValueError("opaque_fraction must lie in [0, 1]")
        lo, hi = self.opacity_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValueError("opacity_range must satisfy 0 < lo <= hi <= 1")
        if self.color_policy not in ("palette", "uniform", "mix"):
            raise ValueError(f"unknown color policy {self.color_policy!r}")


@dataclass(frozen=True)
class StrokeParams:
    control_points: np.ndarray  # (n, 2) in pixel coords
    width: float
    opacity: float
    color: tuple[float, float, float]


@dataclass(frozen=True)
class SynthSample:
    before: Canvas
    stroke_gt: Hyperstroke
    after: Canvas
    opacity: float
    color: tuple[float, float, float]
    seed: int


def bezier_points(control: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a Bezier curve of arbitrary degree at n uniform parameters."""
    control = np.asarray(control, dtype=np.float64)
    ts = np.linspace(0.0, 1.0, n)
    pts = np.repeat(control[None, :, :], n, axis=0)  # (n, deg+1, 2)
    while pts.shape[1] > 1:  # de Casteljau
        pts = pts[:, :-1, :] * (1.0 - ts)[:, None, None] + pts[:, 1:, :] * ts[:, None, None]
    return pts[:, 0, :]


def _min_distance(samples: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distance from each sample point to a polyline, blocked over segments."""
    if len(points) == 1:
        return np.sqrt(((samples - points[0]) ** 2).sum(axis=1))
    a, b = points[:-1], points[1:]
    ab = b - a
    ab_len2 = np.maximum((ab**2).sum(axis=1), 1e-300)
    min_d2 = np.full(len(samples), np.inf)
    block = max(1, 2_000_000 // max(len(samples), 1))
    for i in range(0, len(a), block):
        a_blk, ab_blk = a[i : i + block], ab[i : i + block]
        ap = samples[:, None, :] - a_blk[None, :, :]  # (m, s, 2)
        t = np.clip(
            (ap * ab_blk[None, :, :]).sum(axis=2) / ab_len2[i : i + block], 0.0, 1.0
        )
        d2 = ((ap - t[:, :, None] * ab_blk[None, :, :]) ** 2).sum(axis=2)
        np.minimum(min_d2, d2.min(axis=1), out=min_d2)
    return np.sqrt(min_d2)


def rasterize_polyline(
    points: np.ndarray,
    width: float,
    dims: tuple[int, int],
    supersample: int = 4,
) -> np.ndarray:
    """Coverage map of a round-capped polyline of the given width.

    Coverage of a pixel is the fraction of its supersample x supersample
    subsamples lying within width/2 of the polyline, so values are exact
    multiples of 1/supersample^2. Pixels whose centers are far enough from
    the curve to be provably full or empty skip the subsample test.
    """
    w, h = dims
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or len(points) < 1:
        raise ValueError("polyline must be an (n, 2) point array")
    radius = width / 2.0
    coverage = np.zeros((h, w), dtype=np.float64)

    # Only pixels near the curve can be covered.
    x_lo = max(int(np.floor(points[:, 0].min() - radius - 1)), 0)
    x_hi = min(int(np.ceil(points[:, 0].max() + radius + 1)), w)
    y_lo = max(int(np.floor(points[:, 1].min() - radius - 1)), 0)
    y_hi = min(int(np.ceil(points[:, 1].max() + radius + 1)), h)
    if x_lo >= x_hi or y_lo >= y_hi:
        return coverage

    s = supersample
    gx, gy = np.meshgrid(
        np.arange(x_lo, x_hi, dtype=np.float64) + 0.5,
        np.arange(y_lo, y_hi, dtype=np.float64) + 0.5,
    )
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d_center = _min_distance(centers, points)

    # The farthest subsample sits (s-1)/(2s) * sqrt(2) from the pixel center.
    margin = (s - 1) / (2.0 * s) * np.sqrt(2.0) + 1e-9
    region = np.zeros(len(centers), dtype=np.float64)
    region[d_center <= radius - margin] = 1.0
    boundary = (d_center > radius - margin) & (d_center < radius + margin)

    if boundary.any():
        offs = (np.arange(s) + 0.5) / s - 0.5
        ox, oy = np.meshgrid(offs, offs)
        offsets = np.stack([ox.ravel(), oy.ravel()], axis=1)  # (s*s, 2)
        sub = (centers[boundary][:, None, :] + offsets[None, :, :]).reshape(-1, 2)
        d_sub = _min_distance(sub, points)
        inside = (d_sub <= radius).reshape(-1, s * s)
        region[boundary] = inside.mean(axis=1)

    coverage[y_lo:y_hi, x_lo:x_hi] = region.reshape(y_hi - y_lo, x_hi - x_lo)
    return coverage


def sample_stroke_params(
    rng: np.random.Generator,
    config: SynthConfig,
    canvas_dims: tuple[int, int],
    palette_image: np.ndarray | None = None,
) -> StrokeParams:
    """Draw the random stroke parameters without rasterizing anything."""
    w, h = canvas_dims
    n_lo, n_hi = config.control_point_range
    n_ctrl = int(rng.integers(n_lo, n_hi + 1))
    for _ in range(64):
        control = np.stack(
            [rng.uniform(0, w, size=n_ctrl), rng.uniform(0, h, size=n_ctrl)], axis=1
        )
        if np.ptp(control, axis=0).max() > 1.0:  # reject near-degenerate curves
            break
    lo_w, hi_w = config.width_range
    width = float(np.exp(rng.uniform(np.log(lo_w), np.log(hi_w))))
    if rng.random() < config.opaque_fraction:
        opacity = 1.0
    else:
        opacity = float(rng.uniform(*config.opacity_range))
    policy = config.color_policy
    if policy == "mix":
        policy = "palette" if rng.random() < 0.5 else "uniform"
    if policy == "palette" and palette_image is not None:
        py = int(rng.integers(0, palette_image.shape[0]))
        px = int(rng.integers(0, palette_image.shape[1]))
        color = tuple(float(v) for v in palette_image[py, px])
    else:
        color = tuple(float(v) for v in rng.uniform(0.0, 1.0, size=3))
    return StrokeParams(control_points=control, width=width, opacity=opacity, color=color)


def synth_stroke(
    rng: np.random.Generator,
    config: SynthConfig,
    canvas_dims: tuple[int, int],
    palette_image: np.ndarray | None = None,
) -> Hyperstroke:
    """Rasterize one random Bezier stroke; alpha = coverage * base opacity."""
    return _synth_stroke_with_params(rng, config, canvas_dims, palette_image)[0]


def _synth_stroke_with_params(
    rng: np.random.Generator,
    config: SynthConfig,
    canvas_dims: tuple[int, int],
    palette_image: np.ndarray | None = None,
) -> tuple[Hyperstroke, StrokeParams]:
    for _ in range(64):
        params = sample_stroke_params(rng, config, canvas_dims, palette_image)
        stroke = render_stroke(params, config, canvas_dims)
        if stroke is not None:
            return stroke, params
    raise RuntimeError("could not synthesize a non-degenerate stroke")


def render_stroke(
    params: StrokeParams, config: SynthConfig, canvas_dims: tuple[int, int]
) -> Hyperstroke | None:
    """Deterministic rasterization of stroke params; None if support is empty."""
    length = float(np.linalg.norm(np.diff(params.control_points, axis=0), axis=1).sum())
    n_pts = int(np.clip(length / 2.0, 8, 256))
    pts = bezier_points(params.control_points, n_pts)
    coverage = rasterize_polyline(pts, params.width, canvas_dims, config.supersample)
    alpha = coverage * params.opacity
    box = support_bbox(alpha)
    if box is None:
        return None
    alpha = alpha[box.y1 : box.y2, box.x1 : box.x2]
    rgb = np.empty((box.height, box.width, 3), dtype=np.float64)
    rgb[:] = params.color
    return Hyperstroke(image=AlphaImage(rgb=rgb, alpha=alpha), box=box)


def make_sample(
    rng: np.random.Generator, config: SynthConfig, source_image: np.ndarray
) -> SynthSample:
    """Random crop of a source drawing plus one ground-truth stroke over it."""
    src = np.asarray(source_image, dtype=np.float64)
    size = config.crop_size
    if src.shape[0] < size or src.shape[1] < size:
        raise ValueError(
            f"source {src.shape[1]}x{src.shape[0]} smaller than crop size {size}"
        )
    seed = int(rng.integers(0, 2**31 - 1))
    sample_rng = np.random.default_rng(seed)
    y0 = int(sample_rng.integers(0, src.shape[0] - size + 1))
    x0 = int(sample_rng.integers(0, src.shape[1] - size + 1))
    before = Canvas(src[y0 : y0 + size, x0 : x0 + size].copy())
    stroke, params = _synth_stroke_with_params(
        sample_rng, config, (size, size), palette_image=before.pixels
    )
    after = blend(before, stroke)
    return SynthSample(
        before=before,
        stroke_gt=stroke,
        after=after,
        opacity=params.opacity,
        color=params.color,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Manifest I/O (shared schema with the timelapse/doodle ingest pipelines)


@dataclass(frozen=True)
class ManifestRecord:
    """One training item; paths are relative to the manifest's directory."""

    id: str
    before: str
    after: str
    supervision: str  # direct | implicit
    box: tuple[int, int, int, int]
    stroke: str | None = None
    opacity: float | None = None
    color: tuple[float, float, float] | None = None
    seed: int | None = None

    def to_json(self) -> str:
        d = {k: v for k, v in dataclasses.asdict(self).items() if v is not None}
        d["box"] = list(self.box)
        if self.color is not None:
            d["color"] = list(self.color)
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "ManifestRecord":
        d = json.loads(line)
        if d.get("color") is not None:
            d["color"] = tuple(d["color"])
        d["box"] = tuple(d["box"])
        return ManifestRecord(**d)


def write_manifest(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path) -> list[ManifestRecord]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    return [ManifestRecord.from_json(line) for line in lines if line.strip()]


def write_dataset(samples, root) -> list[ManifestRecord]:
    """Write before/after/stroke PNGs plus manifest.jsonl under ``root``."""
    root = Path(root)
    for sub in ("before", "after", "stroke"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    records = []
    for i, sample in enumerate(samples):
        name = f"{i:05d}.png"
        write_canvas_png(sample.before, root / "before" / name)
        write_canvas_png(sample.after, root / "after" / name)
        write_alpha_png(sample.stroke_gt.image, root / "stroke" / name)
        records.append(
            ManifestRecord(
                id=f"{i:05d}",
                before=f"before/{name}",
                after=f"after/{name}",
                stroke=f"stroke/{name}",
                supervision="direct",
                box=sample.stroke_gt.box.as_tuple(),
                opacity=sample.opacity,
                color=sample.color,
                seed=sample.seed,
            )
        )
    write_manifest(records, root / "manifest.jsonl")
    return records


def generate_dataset(
    rng: np.random.Generator,
    config: SynthConfig,
    source_images,
    n_samples: int,
) -> list[SynthSample]:
    """Round-robin samples over the given sources until n_samples are drawn."""
    sources = list(source_images)
    if not sources:
        raise ValueError("need at least one source image")
    out = []
    i = 0
    while len(out) < n_samples:
        out.append(make_sample(rng, config, sources[i % len(sources)]))
        i += 1
    return out
