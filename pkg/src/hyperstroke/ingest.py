"""Real-data ingestion: timelapse frame pairs and vector doodle corpora.

Timelapse videos capture the canvas after every applied stroke but never the
stroke itself, so each consecutive frame pair becomes an implicitly supervised
training item: the changed region is located by differencing, snapped to the
token grid, and the pair is stored without any ground-truth stroke. Vector
doodle sketches (Quick-Draw style NDJSON polylines) are rasterized per stroke
into alpha images so whole drawing sequences can be tokenized for the
sequence model.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import (
    AlphaImage,
    BBox,
    BBoxTokens,
    Canvas,
    GridSpec,
    Hyperstroke,
    blend,
    compose,
    crop_and_resize,
    diff_bbox,
    read_canvas_png,
    snap_box,
    support_bbox,
    to_u8,
    write_canvas_png,
)
from .synth import ManifestRecord, rasterize_polyline, write_manifest
from .tokens import TokenVocab, frame_sequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FramePair:
    before: Canvas
    after: Canvas
    box: BBox  # pixel-space diff support
    tokens: BBoxTokens
    supervision: str = "implicit"


@dataclass(frozen=True)
class SketchRecord:
    category: str
    strokes: tuple[Hyperstroke, ...]
    width: int
    height: int

    def __post_init__(self):
        if not 3 <= len(self.strokes) <= 15:
            raise ValueError(f"sketch must have 3..15 strokes, got {len(self.strokes)}")


# ---------------------------------------------------------------------------
# Timelapse frames


def load_frames(source) -> tuple[list[Canvas], int]:
    """Frames from a directory of PNGs (sorted by name) or a video file.

    Returns (frames, skipped) where skipped counts unreadable entries.
    """
    source = Path(source)
    frames: list[Canvas] = []
    skipped = 0
    if source.is_dir():
        for path in sorted(source.iterdir()):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            try:
                frames.append(read_canvas_png(path))
            except Exception:
                skipped += 1
                logger.warning("skipping unreadable frame %s", path)
    else:
        import cv2

        cap = cv2.VideoCapture(str(source))
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            frames.append(Canvas(frame[:, :, ::-1].astype(np.float64) / 255.0))
        cap.release()
    return frames, skipped


def extract_pairs(
    frames, min_change: float = 2.0 / 255.0, grid_c: int = 16
) -> list[FramePair]:
    """Consecutive changed-frame pairs with their snapped change boxes.

    Duplicate frames (no pixel above the change threshold) are collapsed, so
    the `before` of each pair is always the last frame that differed.
    """
    frames = list(frames)
    if len(frames) < 2:
        return []
    grid = GridSpec(frames[0].width, frames[0].height, grid_c)
    pairs: list[FramePair] = []
    prev = frames[0]
    for cur in frames[1:]:
        box = diff_bbox(prev, cur, min_change)
        if box is None:
            continue
        pairs.append(
            FramePair(
                before=prev, after=cur, box=box, tokens=snap_box(box, grid)
            )
        )
        prev = cur
    return pairs


def split_of(key: str, val_fraction: float = 0.03) -> str:
    """Deterministic train/val assignment by hashing a source id."""
    h = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=4).digest(), "big")
    return "val" if (h % 10_000) < val_fraction * 10_000 else "train"


def write_pair_dataset(pairs, root, source_id: str = "video") -> list[ManifestRecord]:
    """Store frame pairs as before/after PNGs plus an implicit manifest."""
    root = Path(root)
    (root / "before").mkdir(parents=True, exist_ok=True)
    (root / "after").mkdir(parents=True, exist_ok=True)
    records = []
    for i, pair in enumerate(pairs):
        name = f"{source_id}_{i:05d}.png"
        write_canvas_png(pair.before, root / "before" / name)
        write_canvas_png(pair.after, root / "after" / name)
        records.append(
            ManifestRecord(
                id=f"{source_id}_{i:05d}",
                before=f"before/{name}",
                after=f"after/{name}",
                supervision="implicit",
                box=pair.box.as_tuple(),
            )
        )
    write_manifest(records, root / "manifest.jsonl")
    return records


# ---------------------------------------------------------------------------
# Doodle corpus (Quick-Draw style NDJSON: {"word": ..., "drawing": [[xs, ys], ...]})


@dataclass(frozen=True)
class DoodleConfig:
    canvas_size: int = 128
    min_strokes: int = 3
    max_strokes: int = 15
    subsample: int = 5  # keep 1 of every `subsample` sketches
    width_range: tuple[int, int] = (2, 8)  # uniform integer, px
    scale_range: tuple[float, float] = (0.5, 0.9)  # sketch extent / canvas
    color: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _normalize_drawing(drawing) -> list[np.ndarray] | None:
    strokes = []
    for stroke in drawing:
        if len(stroke) < 2:
            return None
        xs, ys = np.asarray(stroke[0], dtype=np.float64), np.asarray(stroke[1], dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size == 0:
            return None
        strokes.append(np.stack([xs, ys], axis=1))
    return strokes


def place_polylines(
    rng: np.random.Generator, polylines, config: DoodleConfig
) -> tuple[list[np.ndarray], int]:
    """Scale a sketch to a random extent and translate it to fit the canvas."""
    size = config.canvas_size
    all_pts = np.concatenate(polylines, axis=0)
    lo, hi = all_pts.min(axis=0), all_pts.max(axis=0)
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-6))
    target = rng.uniform(*config.scale_range) * size
    scale = target / extent
    span = (hi - lo) * scale
    margin = np.maximum(size - span, 1e-6)
    offset = np.array([rng.uniform(0, margin[0]), rng.uniform(0, margin[1])])
    width = int(rng.integers(config.width_range[0], config.width_range[1] + 1))
    return [(pts - lo) * scale + offset for pts in polylines], width


def render_placed(
    placed, width: int, category: str, config: DoodleConfig
) -> SketchRecord | None:
    """Rasterize already-placed polylines into per-stroke alpha images."""
    size = config.canvas_size
    strokes = []
    for pts in placed:
        coverage = rasterize_polyline(pts, width, (size, size))
        box = support_bbox(coverage)
        if box is None:
            return None
        alpha = coverage[box.y1 : box.y2, box.x1 : box.x2]
        rgb = np.empty((box.height, box.width, 3), dtype=np.float64)
        rgb[:] = config.color
        strokes.append(Hyperstroke(image=AlphaImage(rgb=rgb, alpha=alpha), box=box))
    return SketchRecord(
        category=category, strokes=tuple(strokes), width=size, height=size
    )


def render_sketch(
    rng: np.random.Generator, polylines, category: str, config: DoodleConfig
) -> SketchRecord | None:
    """Place a sketch at a random scale and position, rasterizing each stroke."""
    placed, width = place_polylines(rng, polylines, config)
    return render_placed(placed, width, category, config)


def ingest_doodles(
    lines,
    rng: np.random.Generator,
    config: DoodleConfig = DoodleConfig(),
    limit: int | None = None,
) -> tuple[list[SketchRecord], dict]:
    """Filter, subsample, and rasterize an NDJSON doodle corpus.

    ``lines`` is an iterable of NDJSON strings (or already-parsed dicts).
    Returns the kept records plus counters for filtered/skipped sketches.
    """
    stats = {"read": 0, "malformed": 0, "filtered": 0, "subsampled": 0, "kept": 0}
    records: list[SketchRecord] = []
    for i, line in enumerate(lines):
        if limit is not None and stats["kept"] >= limit:
            break
        stats["read"] += 1
        try:
            entry = json.loads(line) if isinstance(line, (str, bytes)) else line
            drawing = _normalize_drawing(entry["drawing"])
            category = str(entry.get("word", ""))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError):
            stats["malformed"] += 1
            continue
        if drawing is None:
            stats["malformed"] += 1
            continue
        if not config.min_strokes <= len(drawing) <= config.max_strokes:
            stats["filtered"] += 1
            continue
        key = str(entry.get("key_id", i))
        h = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=4).digest(), "big")
        if h % config.subsample != 0:
            stats["subsampled"] += 1
            continue
        record = render_sketch(rng, drawing, category, config)
        if record is None:
            stats["malformed"] += 1
            continue
        records.append(record)
        stats["kept"] += 1
    return records, stats


# ---------------------------------------------------------------------------
# Tokenization against a trained VQ model


def _tokenize_strokes(canvas: Canvas, strokes, grid: GridSpec, vq):
    """(box tokens, visual codes) per stroke, compositing as it goes."""
    entries = []
    for stroke in strokes:
        after = blend(canvas, stroke)
        box_tokens = snap_box(stroke.box, grid)
        patch_a, patch_b = crop_and_resize(
            canvas, after, box_tokens, (vq.patch_width, vq.patch_height)
        )
        entries.append((box_tokens, vq.encode(patch_a, patch_b)))
        canvas = after
    return entries, canvas


def tokenize_record(
    record: SketchRecord,
    grid: GridSpec,
    vq,
    n_max: int | None = None,
) -> tuple[np.ndarray, bool]:
    """Serialize a sketch to [start] + per-stroke (4 box + k visual) ids.

    The canvas is composited stroke by stroke; each stroke's visual codes come
    from encoding its (before, after) composite pair cropped to the snapped
    stroke box. Returns (ids, truncated).
    """
    vocab = TokenVocab(grid_c=grid.grid_c, codebook_size=vq.codebook_size)
    strokes = list(record.strokes)
    truncated = False
    if n_max is not None and len(strokes) > n_max:
        strokes = strokes[:n_max]
        truncated = True
    entries, _ = _tokenize_strokes(
        Canvas.blank(record.width, record.height), strokes, grid, vq
    )
    return frame_sequence(vocab, entries, vq.k), truncated


def _record_key(record: SketchRecord) -> int:
    payload = record.category + "".join(
        str(s.box.as_tuple()) for s in record.strokes
    )
    return int.from_bytes(hashlib.blake2b(payload.encode(), digest_size=4).digest(), "big")


def build_seq_training_set(
    records,
    grid: GridSpec,
    vq,
    n_max: int,
    prefix_mode: str = "hash",
    rng: np.random.Generator | None = None,
):
    """Training rows for the sequence model: (sequences, categories, canvases).

    Each record contributes one row: the canvas after a prefix of t strokes
    (t chosen per ``prefix_mode``) and the token sequence of up to n_max
    strokes that continue from it. Canvases are returned as (N, H, W, 3)
    uint8 so they can live in the token cache alongside the id arrays.
    """
    sequences, categories, canvases = [], [], []
    for record in records:
        n = len(record.strokes)
        if prefix_mode == "zero":
            t = 0
        elif prefix_mode == "hash":
            t = _record_key(record) % n
        elif prefix_mode == "random":
            if rng is None:
                raise ValueError("random prefix mode needs an rng")
            t = int(rng.integers(0, n))
        else:
            raise ValueError(f"unknown prefix mode {prefix_mode!r}")
        canvas = Canvas.blank(record.width, record.height)
        if t:
            canvas = compose(canvas, record.strokes[:t])
        remaining = record.strokes[t : t + n_max]
        vocab = TokenVocab(grid_c=grid.grid_c, codebook_size=vq.codebook_size)
        entries, _ = _tokenize_strokes(canvas, remaining, grid, vq)
        sequences.append(frame_sequence(vocab, entries, vq.k))
        categories.append(record.category)
        canvases.append(to_u8(canvas.pixels))
    return sequences, categories, np.stack(canvases)


# ---------------------------------------------------------------------------
# Token cache: binary arrays plus a JSON header


@dataclass(frozen=True)
class TokenCache:
    tokens: np.ndarray  # (N, L) int32, pad-filled
    lengths: np.ndarray  # (N,) int32
    categories: list[str]
    vocab: TokenVocab
    k: int
    n_max: int
    canvases: np.ndarray | None = None  # (N, H, W, 3) uint8 context canvases

    def __post_init__(self):
        n = self.tokens.shape[0]
        if self.lengths.shape[0] != n or len(self.categories) != n:
            raise ValueError("cache arrays disagree on record count")
        if self.canvases is not None and self.canvases.shape[0] != n:
            raise ValueError("canvas array disagrees on record count")


def write_token_cache(
    cache_dir,
    sequences,
    categories,
    vocab: TokenVocab,
    k: int,
    n_max: int,
    canvases: np.ndarray | None = None,
) -> None:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    max_len = 1 + n_max * (4 + k)
    tokens = np.full((len(sequences), max_len), vocab.pad_id, dtype=np.int32)
    lengths = np.zeros(len(sequences), dtype=np.int32)
    for i, seq in enumerate(sequences):
        seq = np.asarray(seq, dtype=np.int32)
        n = len(seq)
        if n > max_len:
            raise ValueError(f"sequence {i} of length {n} exceeds context {max_len}")
        tokens[i, :n] = seq
        if n < max_len:  # room for an explicit end marker
            tokens[i, n] = vocab.end_id
            n += 1
        lengths[i] = n
    np.save(cache_dir / "tokens.npy", tokens)
    np.save(cache_dir / "lengths.npy", lengths)
    if canvases is not None:
        np.save(cache_dir / "canvases.npy", np.asarray(canvases, dtype=np.uint8))
    header = {
        "bbox_vocab": vocab.bbox_vocab,
        "visual_vocab": vocab.codebook_size,
        "k": k,
        "C": vocab.grid_c,
        "n_max": n_max,
        "format_version": 1,
    }
    (cache_dir / "header.json").write_text(json.dumps(header, indent=2))
    (cache_dir / "categories.json").write_text(json.dumps(list(categories)))


def read_token_cache(cache_dir) -> TokenCache:
    cache_dir = Path(cache_dir)
    header = json.loads((cache_dir / "header.json").read_text())
    vocab = TokenVocab(grid_c=header["C"], codebook_size=header["visual_vocab"])
    if vocab.bbox_vocab != header["bbox_vocab"]:
        raise ValueError("cache header inconsistent: bbox vocab != C + 1")
    tokens = np.load(cache_dir / "tokens.npy")
    lengths = np.load(cache_dir / "lengths.npy")
    categories = json.loads((cache_dir / "categories.json").read_text())
    canvas_path = cache_dir / "canvases.npy"
    canvases = np.load(canvas_path) if canvas_path.exists() else None
    return TokenCache(
        tokens=tokens,
        lengths=lengths,
        categories=categories,
        vocab=vocab,
        k=header["k"],
        n_max=header["n_max"],
        canvases=canvases,
    )
