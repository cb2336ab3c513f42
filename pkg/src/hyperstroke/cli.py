"""Single entry point for the pipeline: data, training, inference, serving.

Configuration is layered: built-in defaults, then an optional config file
(`KEY=VALUE` lines or a JSON object), then `HS_`-prefixed environment
variables, then explicit command-line flags. The fully resolved configuration
is echoed to the output directory as config.json before anything runs, and
every command accepts --seed so reruns are byte-identical.

Exit codes: 0 success, 2 bad configuration, 3 data error, 4 checkpoint error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

logger = logging.getLogger("hyperstroke")


class ConfigError(Exception):
    exit_code = 2


class DataError(Exception):
    exit_code = 3


class CheckpointError(Exception):
    exit_code = 4


def parse_config_file(path: Path) -> dict:
    """KEY=VALUE lines, or a JSON object if the file starts with '{'."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON config {path}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return {str(k): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def coerce(value, like):
    """Parse a config-file/env string into the type of the default value."""
    if value is None or not isinstance(value, str):
        return value
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def resolve_config(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < HS_* environment < explicit flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = parse_config_file(Path(args.config))
        for key, value in file_cfg.items():
            if key not in resolved:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[key] = coerce(value, defaults.get(key))
    for key in resolved:
        env_key = "HS_" + key.upper()
        if env_key in os.environ:
            resolved[key] = coerce(os.environ[env_key], defaults.get(key))
    for key in resolved:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def echo_config(resolved: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True))


def procedural_sources(rng: np.random.Generator, count: int, size: int) -> list[np.ndarray]:
    """Smooth art-like source images for hermetic demo runs."""
    sources = []
    for _ in range(count):
        yy, xx = np.mgrid[0:size, 0:size] / size
        fx, fy = rng.uniform(1.0, 6.0, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        img = np.stack(
            [
                (np.sin(fx * xx * 2 * np.pi + phase[0]) + 1) / 2,
                (np.cos(fy * yy * 2 * np.pi + phase[1]) + 1) / 2,
                (np.sin((xx + yy) * fx * np.pi + phase[2]) + 1) / 2,
            ],
            axis=2,
        )
        img = 0.6 * img + 0.4 * rng.random((size, size, 3))
        sources.append(np.clip(img, 0.0, 1.0))
    return sources


def load_source_images(path: Path, min_size: int) -> list[np.ndarray]:
    from .raster import read_canvas_png

    images = []
    for p in sorted(path.iterdir()):
        if p.suffix.lower() in (".png", ".jpg", ".jpeg"):
            try:
                img = read_canvas_png(p).pixels
            except Exception:
                logger.warning("skipping unreadable source %s", p)
                continue
            if img.shape[0] >= min_size and img.shape[1] >= min_size:
                images.append(img)
    if not images:
        raise DataError(f"no usable source images of at least {min_size}px in {path}")
    return images


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth_data(args) -> int:
    from .synth import SynthConfig, generate_dataset, write_dataset

    defaults = {
        "samples": 64,
        "crop_size": 128,
        "sources": "",
        "n_procedural_sources": 4,
        "opaque_fraction": 0.3,
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    rng = np.random.default_rng(cfg["seed"])
    if cfg["sources"]:
        sources = load_source_images(Path(cfg["sources"]), cfg["crop_size"])
    else:
        sources = procedural_sources(rng, cfg["n_procedural_sources"], cfg["crop_size"] + 64)
    synth_cfg = SynthConfig(
        crop_size=cfg["crop_size"], opaque_fraction=cfg["opaque_fraction"]
    )
    samples = generate_dataset(rng, synth_cfg, sources, cfg["samples"])
    records = write_dataset(samples, out)
    logger.info("wrote %d samples to %s", len(records), out)
    return 0


def cmd_ingest_timelapse(args) -> int:
    from .ingest import extract_pairs, load_frames, write_pair_dataset

    defaults = {"min_change": 2.0 / 255.0, "grid_c": 16, "seed": 0}
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    frames_path = Path(args.frames)
    if not frames_path.exists():
        raise DataError(f"frames path {frames_path} does not exist")
    frames, skipped = load_frames(frames_path)
    if len(frames) < 2:
        raise DataError(f"need at least 2 readable frames, got {len(frames)}")
    if skipped:
        logger.warning("skipped %d unreadable frames", skipped)
    pairs = extract_pairs(frames, min_change=cfg["min_change"], grid_c=cfg["grid_c"])
    records = write_pair_dataset(pairs, out, source_id=frames_path.stem)
    logger.info("extracted %d pairs from %d frames", len(records), len(frames))
    return 0


def cmd_ingest_doodles(args) -> int:
    from .ingest import (
        DoodleConfig,
        build_seq_training_set,
        ingest_doodles,
        write_token_cache,
    )
    from .raster import GridSpec
    from .tokens import TokenVocab

    defaults = {
        "limit": 64,
        "n_max": 6,
        "canvas_size": 128,
        "grid_c": 16,
        "subsample": 5,
        "prefix_mode": "hash",
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    corpus = Path(args.corpus)
    if not corpus.exists():
        raise DataError(f"corpus {corpus} does not exist")
    vq = _load_vq(args.vq_checkpoint)
    rng = np.random.default_rng(cfg["seed"])
    doodle_cfg = DoodleConfig(canvas_size=cfg["canvas_size"], subsample=cfg["subsample"])
    with corpus.open() as fh:
        records, stats = ingest_doodles(fh, rng, doodle_cfg, limit=cfg["limit"])
    logger.info("doodle ingest stats: %s", stats)
    if not records:
        raise DataError("no usable sketches in corpus")
    grid = GridSpec(cfg["canvas_size"], cfg["canvas_size"], cfg["grid_c"])
    sequences, categories, canvases = build_seq_training_set(
        records, grid, vq, n_max=cfg["n_max"], prefix_mode=cfg["prefix_mode"], rng=rng
    )
    vocab = TokenVocab(grid_c=cfg["grid_c"], codebook_size=vq.codebook_size)
    write_token_cache(
        out / "cache", sequences, categories, vocab, k=vq.k, n_max=cfg["n_max"], canvases=canvases
    )
    logger.info("wrote token cache with %d records to %s", len(sequences), out / "cache")
    return 0


def cmd_train_vq(args) -> int:
    from .vq import VQConfig, train_vq

    defaults = {
        "preset": "desk",
        "codebook_size": 512,
        "steps": 2000,
        "batch_size": 8,
        "base_lr": 0.0,  # 0 means preset default
        "early_stop_psnr": 0.0,
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    presets = {
        "desk": lambda: VQConfig.desk(codebook_size=cfg["codebook_size"], seed=cfg["seed"]),
        "paper-artistic": VQConfig.paper_artistic,
        "paper-sketch": VQConfig.paper_sketch,
    }
    if cfg["preset"] not in presets:
        raise ConfigError(f"unknown preset {cfg['preset']!r}; have {sorted(presets)}")
    vq_cfg = presets[cfg["preset"]]()
    if cfg["base_lr"]:
        import dataclasses

        vq_cfg = dataclasses.replace(vq_cfg, base_lr=cfg["base_lr"])
    manifests = [Path(m) for m in args.manifest]
    for m in manifests:
        if not m.exists():
            raise DataError(f"manifest {m} does not exist")
    try:
        result = train_vq(
            vq_cfg,
            manifests,
            out,
            steps=cfg["steps"],
            batch_size=cfg["batch_size"],
            early_stop_psnr=cfg["early_stop_psnr"] or None,
        )
    except ValueError as exc:
        raise DataError(str(exc))
    logger.info(
        "trained %d steps, composite psnr %.2f dB, checkpoint at %s",
        result.steps,
        result.final_psnr,
        result.checkpoint_path,
    )
    return 0


def cmd_train_seq(args) -> int:
    from .ingest import read_token_cache
    from .seq import SeqTrainConfig, train_seq

    defaults = {
        "steps": 800,
        "batch_size": 8,
        "d_model": 128,
        "n_heads": 4,
        "n_layers": 3,
        "early_stop_accuracy": 0.0,
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    cache_dir = Path(args.cache)
    if not cache_dir.exists():
        raise DataError(f"token cache {cache_dir} does not exist")
    cache = read_token_cache(cache_dir)
    if cache.canvases is None:
        raise DataError("token cache lacks context canvases; rebuild with ingest-doodles")
    vq = _load_vq(args.vq_checkpoint)
    seq_cfg = SeqTrainConfig(
        grid_c=cache.vocab.grid_c,
        codebook_size=cache.vocab.codebook_size,
        k=cache.k,
        n_max=cache.n_max,
        canvas_size=cache.canvases.shape[1],
        d_model=cfg["d_model"],
        n_heads=cfg["n_heads"],
        n_layers=cfg["n_layers"],
        seed=cfg["seed"],
    )
    try:
        result = train_seq(
            seq_cfg,
            cache,
            cache.canvases,
            out,
            vq_codebook_size=vq.codebook_size,
            steps=cfg["steps"],
            batch_size=cfg["batch_size"],
            early_stop_accuracy=cfg["early_stop_accuracy"] or None,
        )
    except ValueError as exc:
        raise DataError(str(exc))
    logger.info(
        "trained %d steps, final batch accuracy %s, checkpoint at %s",
        result.steps,
        result.final_accuracy,
        result.checkpoint_path,
    )
    return 0


def _load_vq(path):
    from .vq import load_vq_checkpoint

    if not path:
        raise CheckpointError("a --vq-checkpoint is required")
    try:
        model, _ = load_vq_checkpoint(path)
    except FileNotFoundError as exc:
        raise CheckpointError(str(exc))
    except (ValueError, RuntimeError, KeyError) as exc:
        raise CheckpointError(f"cannot load VQ checkpoint {path}: {exc}")
    return model


def _load_seq(path):
    from .seq import load_seq_checkpoint

    if not path:
        raise CheckpointError("a --seq-checkpoint is required")
    try:
        model, _ = load_seq_checkpoint(path)
    except FileNotFoundError as exc:
        raise CheckpointError(str(exc))
    except (ValueError, RuntimeError, KeyError) as exc:
        raise CheckpointError(f"cannot load sequence checkpoint {path}: {exc}")
    return model


def cmd_encode(args) -> int:
    from .raster import GridSpec, crop_and_resize, diff_bbox, read_canvas_png, snap_box

    defaults = {"grid_c": 16, "min_change": 2.0 / 255.0, "seed": 0}
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    vq = _load_vq(args.vq_checkpoint)
    try:
        before = read_canvas_png(args.before)
        after = read_canvas_png(args.after)
    except OSError as exc:
        raise DataError(str(exc))
    box = diff_bbox(before, after, threshold=cfg["min_change"])
    if box is None:
        raise DataError("frames are identical; nothing to encode")
    grid = GridSpec(before.width, before.height, cfg["grid_c"])
    tokens = snap_box(box, grid)
    patch_a, patch_b = crop_and_resize(before, after, tokens, (vq.patch_width, vq.patch_height))
    codes = vq.encode(patch_a, patch_b)
    payload = {
        "bbox_tokens": list(tokens.as_tuple()),
        "visual_tokens": [int(c) for c in codes],
        "grid_c": cfg["grid_c"],
        "canvas_size": [before.width, before.height],
    }
    (out / "tokens.json").write_text(json.dumps(payload, indent=2))
    logger.info("encoded stroke tokens to %s", out / "tokens.json")
    return 0


def cmd_decode(args) -> int:
    from .raster import (
        BBoxTokens,
        GridSpec,
        Hyperstroke,
        unsnap_box,
        write_hyperstroke,
    )

    defaults = {"seed": 0}
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    vq = _load_vq(args.vq_checkpoint)
    try:
        payload = json.loads(Path(args.tokens).read_text())
        codes = np.asarray(payload["visual_tokens"], dtype=np.int64)
        bbox = BBoxTokens(*payload["bbox_tokens"], grid_c=payload["grid_c"])
        width, height = payload["canvas_size"]
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad tokens file {args.tokens}: {exc}")
    image = vq.decode(codes)
    grid = GridSpec(width, height, payload["grid_c"])
    box = unsnap_box(bbox, grid)
    stroke = Hyperstroke(image=image, box=box, resized=True)
    write_hyperstroke(stroke, out / "stroke.png", grid_c=payload["grid_c"])
    logger.info("decoded stroke to %s", out / "stroke.png")
    return 0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a - b) ** 2))
    return float("inf") if mse == 0.0 else -10.0 * float(np.log10(mse))


def cmd_reconstruct_timelapse(args) -> int:
    from .ingest import extract_pairs, load_frames
    from .raster import (
        GridSpec,
        Hyperstroke,
        blend,
        crop_and_resize,
        unsnap_box,
        write_canvas_png,
        write_hyperstroke,
    )

    defaults = {"min_change": 2.0 / 255.0, "grid_c": 16, "seed": 0}
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    vq = _load_vq(args.vq_checkpoint)
    frames, skipped = load_frames(Path(args.frames))
    if len(frames) < 2:
        raise DataError(f"need at least 2 frames, got {len(frames)}")
    pairs = extract_pairs(frames, min_change=cfg["min_change"], grid_c=cfg["grid_c"])
    (out / "strokes").mkdir(parents=True, exist_ok=True)
    composite = frames[0]
    grid = GridSpec(frames[0].width, frames[0].height, cfg["grid_c"])
    per_frame = []
    for i, pair in enumerate(pairs):
        patch_a, patch_b = crop_and_resize(
            pair.before, pair.after, pair.tokens, (vq.patch_width, vq.patch_height)
        )
        image = vq.decode(vq.encode(patch_a, patch_b))
        stroke = Hyperstroke(
            image=image, box=unsnap_box(pair.tokens, grid), resized=True
        )
        write_hyperstroke(stroke, out / "strokes" / f"{i:04d}.png", grid_c=cfg["grid_c"])
        composite = blend(composite, stroke)
        per_frame.append(psnr(composite.pixels, pair.after.pixels))
    write_canvas_png(composite, out / "composite.png")
    final_psnr = psnr(composite.pixels, frames[-1].pixels) if pairs else float("inf")
    report = {
        "n_frames": len(frames),
        "n_strokes": len(pairs),
        "skipped_frames": skipped,
        "per_frame_psnr": per_frame,
        "final_psnr": final_psnr,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))
    logger.info("reconstructed %d strokes, final psnr %.2f dB", len(pairs), final_psnr)
    return 0


def cmd_eval_vq(args) -> int:
    import torch
    from skimage.metrics import structural_similarity

    from .vq import codebook_usage_histogram, composite, load_patch_items

    defaults = {"seed": 0}
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    vq = _load_vq(args.vq_checkpoint)
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise DataError(f"manifest {manifest} does not exist")
    try:
        data = load_patch_items(manifest, vq.config)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        raise DataError(f"cannot load items from {manifest}: {exc}")
    items = []
    with torch.no_grad():
        for i in range(data.before.shape[0]):
            before = data.before[i : i + 1]
            after = data.after[i : i + 1]
            outputs = vq(torch.cat([before, after], dim=1))
            comp = composite(before, outputs.decoded)[0].permute(1, 2, 0).numpy()
            target = after[0].permute(1, 2, 0).numpy()
            item_psnr = psnr(comp, target)
            ssim = float(
                structural_similarity(comp, target, channel_axis=2, data_range=1.0)
            )
            items.append(
                {
                    "index": i,
                    "psnr": item_psnr if np.isfinite(item_psnr) else None,
                    "exact": not np.isfinite(item_psnr),
                    "ssim": ssim,
                }
            )
    finite = [it["psnr"] for it in items if it["psnr"] is not None]
    usage = codebook_usage_histogram(vq, data)
    metrics = {
        "n_items": len(items),
        "items": items,
        "mean_psnr": float(np.mean(finite)) if finite else None,
        "mean_ssim": float(np.mean([it["ssim"] for it in items])),
        "n_exact": sum(it["exact"] for it in items),
        "codebook_used": int((usage > 0).sum()),
        "codebook_usage": usage.tolist(),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    logger.info(
        "eval over %d items: mean psnr %s, codebook used %d/%d",
        len(items),
        metrics["mean_psnr"],
        metrics["codebook_used"],
        len(usage),
    )
    return 0


def cmd_suggest(args) -> int:
    from .raster import (
        BBoxTokens,
        Canvas,
        GridSpec,
        read_canvas_png,
        write_canvas_png,
        write_hyperstroke,
    )
    from .seq import SuggestionRequest, render_suggestions, sample

    defaults = {
        "n": 1,
        "temperature": 1.0,
        "top_k": 100,
        "grid_c": 16,
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    out = Path(args.out)
    echo_config(cfg, out)
    vq = _load_vq(args.vq_checkpoint)
    seq_model = _load_seq(args.seq_checkpoint)
    model_size = seq_model.config.canvas_size
    if args.canvas:
        try:
            canvas = read_canvas_png(args.canvas)
        except OSError as exc:
            raise DataError(str(exc))
        if canvas.width != model_size or canvas.height != model_size:
            raise DataError(
                f"canvas must be {model_size}x{model_size} for this checkpoint"
            )
    else:
        canvas = Canvas.blank(model_size, model_size)
    prompt_bbox = None
    if args.prompt_bbox:
        try:
            corners = [int(v) for v in args.prompt_bbox.split(",")]
            prompt_bbox = BBoxTokens(*corners, grid_c=cfg["grid_c"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad --prompt-bbox: {exc}")
    prompt_strokes = None
    if args.prompt_strokes:
        try:
            entries = json.loads(Path(args.prompt_strokes).read_text())
            prompt_strokes = tuple(
                (
                    BBoxTokens(*e["bbox"], grid_c=cfg["grid_c"]),
                    np.asarray(e["visual"], dtype=np.int64),
                )
                for e in entries
            )
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"bad prompt strokes file: {exc}")
    try:
        request = SuggestionRequest(
            canvas=canvas,
            condition=args.condition,
            prompt_strokes=prompt_strokes,
            prompt_bbox=prompt_bbox,
            n=cfg["n"],
            temperature=cfg["temperature"],
            top_k=cfg["top_k"],
            seed=cfg["seed"],
        )
        grid = GridSpec(canvas.width, canvas.height, cfg["grid_c"])
        strokes = sample(seq_model, vq, request, grid=grid)
    except ValueError as exc:
        raise DataError(str(exc))
    previews = render_suggestions(canvas, strokes)
    manifest = []
    for i, (stroke, preview) in enumerate(zip(strokes, previews)):
        write_hyperstroke(stroke.stroke, out / f"stroke_{i:02d}.png", grid_c=cfg["grid_c"])
        write_canvas_png(preview, out / f"preview_{i:02d}.png")
        manifest.append(
            {
                "bbox_tokens": list(stroke.box_tokens.as_tuple()),
                "visual_tokens": [int(c) for c in stroke.visual_codes],
                "bbox_pixels": list(stroke.stroke.box.as_tuple()),
                "stroke_png": f"stroke_{i:02d}.png",
                "preview_png": f"preview_{i:02d}.png",
            }
        )
    (out / "suggestions.json").write_text(json.dumps(manifest, indent=2))
    logger.info("wrote %d suggestions to %s", len(strokes), out)
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run_service

    defaults = {
        "host": "127.0.0.1",
        "port": 8000,
        "canvas_size": 128,
        "max_sessions": 64,
        "seed": 0,
    }
    cfg = resolve_config(defaults, args)
    service_cfg = ServiceConfig(
        vq_checkpoint=args.vq_checkpoint,
        seq_checkpoint=args.seq_checkpoint,
        canvas_size=cfg["canvas_size"],
        max_sessions=cfg["max_sessions"],
    )
    try:
        run_service(service_cfg, host=cfg["host"], port=cfg["port"])
    except FileNotFoundError as exc:
        raise CheckpointError(str(exc))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperstroke", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn):
        p = sub.add_parser(name)
        p.add_argument("--config", help="KEY=VALUE or JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(fn=fn)
        return p

    p = add("synth-data", cmd_synth_data)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--crop-size", dest="crop_size", type=int, default=None)
    p.add_argument("--sources", default=None, help="directory of source drawings")
    p.add_argument("--opaque-fraction", dest="opaque_fraction", type=float, default=None)

    p = add("ingest-timelapse", cmd_ingest_timelapse)
    p.add_argument("--frames", required=True, help="frame directory or video file")
    p.add_argument("--out", required=True)
    p.add_argument("--min-change", dest="min_change", type=float, default=None)
    p.add_argument("--grid-c", dest="grid_c", type=int, default=None)

    p = add("ingest-doodles", cmd_ingest_doodles)
    p.add_argument("--corpus", required=True, help="NDJSON sketch corpus")
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--canvas-size", dest="canvas_size", type=int, default=None)
    p.add_argument("--prefix-mode", dest="prefix_mode", default=None)

    p = add("train-vq", cmd_train_vq)
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", default=None, choices=["desk", "paper-artistic", "paper-sketch"])
    p.add_argument("--codebook-size", dest="codebook_size", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--base-lr", dest="base_lr", type=float, default=None)
    p.add_argument("--early-stop-psnr", dest="early_stop_psnr", type=float, default=None)

    p = add("train-seq", cmd_train_seq)
    p.add_argument("--cache", required=True, help="token cache directory")
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--d-model", dest="d_model", type=int, default=None)
    p.add_argument("--n-heads", dest="n_heads", type=int, default=None)
    p.add_argument("--n-layers", dest="n_layers", type=int, default=None)
    p.add_argument(
        "--early-stop-accuracy", dest="early_stop_accuracy", type=float, default=None
    )

    p = add("encode", cmd_encode)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-c", dest="grid_c", type=int, default=None)

    p = add("decode", cmd_decode)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--tokens", required=True, help="tokens.json from encode")
    p.add_argument("--out", required=True)

    p = add("reconstruct-timelapse", cmd_reconstruct_timelapse)
    p.add_argument("--frames", required=True)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-change", dest="min_change", type=float, default=None)
    p.add_argument("--grid-c", dest="grid_c", type=int, default=None)

    p = add("eval-vq", cmd_eval_vq)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = add("suggest", cmd_suggest)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", required=True)
    p.add_argument("--seq-checkpoint", dest="seq_checkpoint", required=True)
    p.add_argument("--canvas", default=None, help="canvas PNG (blank if omitted)")
    p.add_argument("--condition", default=None)
    p.add_argument("--prompt-bbox", dest="prompt_bbox", default=None, help="X1,Y1,X2,Y2 grid tokens")
    p.add_argument("--prompt-strokes", dest="prompt_strokes", default=None, help="JSON file of prior strokes")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("serve", cmd_serve)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--vq-checkpoint", dest="vq_checkpoint", default=None)
    p.add_argument("--seq-checkpoint", dest="seq_checkpoint", default=None)
    p.add_argument("--canvas-size", dest="canvas_size", type=int, default=None)
    p.add_argument("--max-sessions", dest="max_sessions", type=int, default=None)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 2
    except DataError as exc:
        logger.error("data error: %s", exc)
        return 3
    except CheckpointError as exc:
        logger.error("checkpoint error: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
