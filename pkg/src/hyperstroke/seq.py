"""Autoregressive stroke sequence model with canvas and text conditioning.

An encoder-decoder transformer: a patch-based canvas encoder summarizes the
current drawing surface, an optional text encoder embeds a guidance string,
and a causal decoder attends to both (via cross-attention over the
concatenated context) while emitting stroke tokens. Each stroke decodes as 4
box tokens followed by k visual tokens; box cross-entropy is up-weighted by
k/4 so the handful of box positions is not drowned out by the visual ones.

Sampling is position-constrained: box positions can only produce box tokens
(with the monotonic corner order enforced by masking), visual positions only
codebook indices, so every emitted stroke is structurally valid by
construction. Supported prompting modes: (a) nothing but the canvas, (b) a
prefix of already-drawn strokes, (c) a fixed box whose content is completed.

Encoders are pluggable: the default "tiny" backend is trained from scratch
and needs no external weights; pretrained frozen backends can be registered
under new names.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .ingest import TokenCache
from .raster import (
    BBoxTokens,
    Canvas,
    GridSpec,
    Hyperstroke,
    blend,
    unsnap_box,
)
from .tokens import KIND_BBOX, KIND_VISUAL, TokenVocab


@dataclass(frozen=True)
class SeqTrainConfig:
    grid_c: int = 16
    codebook_size: int = 2048
    k: int = 64
    n_max: int = 12
    canvas_size: int = 128
    canvas_patch: int = 16
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 3
    dropout: float = 0.0
    encoder_backend: str = "tiny"
    condition_backend: str = "tiny"
    freeze_encoders: bool = False
    text_len: int = 16
    base_lr: float = 5e-4
    warmup_steps: int = 100
    lr_anneal: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.canvas_size % self.canvas_patch:
            raise ValueError("canvas size must be divisible by the patch size")

    @property
    def bbox_weight(self) -> float:
        """Cross-entropy weight on box positions; fixed at k / 4."""
        return self.k / 4.0

    @property
    def seq_len(self) -> int:
        return 1 + self.n_max * (4 + self.k)

    @property
    def vocab(self) -> TokenVocab:
        return TokenVocab(grid_c=self.grid_c, codebook_size=self.codebook_size)

    @staticmethod
    def paper_reference() -> "SeqTrainConfig":
        """Full-scale reference: a 345M-parameter decoder over 817 positions."""
        return SeqTrainConfig(
            codebook_size=2048,
            n_max=12,
            d_model=1024,
            n_heads=16,
            n_layers=24,
            encoder_backend="hf-vit",
            condition_backend="hf-clip",
            freeze_encoders=True,
            base_lr=5e-4,
        )

    @staticmethod
    def desk(codebook_size: int = 512, n_max: int = 6, seed: int = 0) -> "SeqTrainConfig":
        return SeqTrainConfig(
            codebook_size=codebook_size,
            n_max=n_max,
            d_model=128,
            n_heads=4,
            n_layers=3,
            base_lr=1e-3,
            warmup_steps=50,
            seed=seed,
        )


def decoder_param_estimate(config: SeqTrainConfig) -> int:
    """Analytic parameter count of the causal decoder stack."""
    d = config.d_model
    per_block = 4 * d * d + 4 * d * d + 8 * d * d  # self-attn + cross-attn + mlp
    vocab = config.vocab.size
    return config.n_layers * per_block + vocab * d + config.seq_len * d + d * vocab


# ---------------------------------------------------------------------------
# Context encoders (pluggable backends)


class TinyCanvasEncoder(nn.Module):
    """Patch-embedding canvas encoder trained together with the decoder."""

    def __init__(self, config: SeqTrainConfig):
        super().__init__()
        self.patch = nn.Conv2d(
            3, config.d_model, config.canvas_patch, stride=config.canvas_patch
        )
        n_patches = (config.canvas_size // config.canvas_patch) ** 2
        self.pos = nn.Parameter(torch.zeros(1, n_patches, config.d_model))
        nn.init.normal_(self.pos, std=0.02)

    def forward(self, canvas: torch.Tensor) -> torch.Tensor:
        x = self.patch(canvas)  # (B, D, h, w)
        return x.flatten(2).transpose(1, 2) + self.pos


class TinyTextEncoder(nn.Module):
    """Byte-level condition embedding; handles arbitrary (unseen) strings."""

    PAD = 256

    def __init__(self, config: SeqTrainConfig):
        super().__init__()
        self.text_len = config.text_len
        self.embed = nn.Embedding(257, config.d_model)
        self.pos = nn.Parameter(torch.zeros(1, config.text_len, config.d_model))
        nn.init.normal_(self.pos, std=0.02)

    def encode_ids(self, text: str) -> torch.Tensor:
        raw = text.encode("utf-8")[: self.text_len]
        ids = list(raw) + [self.PAD] * (self.text_len - len(raw))
        return torch.tensor(ids, dtype=torch.long)

    def forward(self, texts: list[str]) -> torch.Tensor:
        ids = torch.stack([self.encode_ids(t) for t in texts])
        return self.embed(ids) + self.pos


class ContextEncoder(nn.Module):
    """Bundles the canvas and condition encoders into one cross-attention memory.

    The memory is the canvas embedding followed by the guidance embedding;
    unconditional requests simply omit the guidance part.
    """

    def __init__(self, config: SeqTrainConfig):
        super().__init__()
        if config.encoder_backend != "tiny" or config.condition_backend != "tiny":
            raise KeyError(
                f"unknown encoder backend "
                f"{config.encoder_backend!r}/{config.condition_backend!r}; "
                "only the self-contained 'tiny' backend ships with this package"
            )
        self.canvas_encoder = TinyCanvasEncoder(config)
        self.text_encoder = TinyTextEncoder(config)

    def forward(self, canvas: torch.Tensor, texts: list[str] | None) -> torch.Tensor:
        tau_c = self.canvas_encoder(canvas)
        if texts is None:
            return tau_c
        tau_g = self.text_encoder(texts)
        return torch.cat([tau_c, tau_g], dim=1)


def encode_context(model: "StrokeSequenceModel", canvas: Canvas, condition: str | None):
    """Deterministic (tau_c, tau_g) embeddings for one canvas and condition."""
    model.eval()
    with torch.no_grad():
        x = canvas_to_tensor(canvas)[None]
        tau_c = model.context.canvas_encoder(x)[0]
        if condition is None:
            tau_g = torch.zeros(0, tau_c.shape[-1])
        else:
            tau_g = model.context.text_encoder([condition])[0]
    return tau_c.numpy(), tau_g.numpy()


def canvas_to_tensor(canvas: Canvas) -> torch.Tensor:
    return torch.from_numpy(canvas.pixels.astype(np.float32)).permute(2, 0, 1)


# ---------------------------------------------------------------------------
# Causal decoder with cross-attention


class SelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)
        self.dropout = dropout

    def forward(self, x: torch.Tensor, cache: dict | None = None) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        shape = (b, t, self.n_heads, d // self.n_heads)
        q, k, v = (u.view(shape).transpose(1, 2) for u in (q, k, v))
        had_prior = cache is not None and "k" in cache
        if cache is not None:
            if had_prior:
                k = torch.cat([cache["k"], k], dim=2)
                v = torch.cat([cache["v"], v], dim=2)
            cache["k"], cache["v"] = k, v
        # full-sequence and cache-priming passes need the causal mask;
        # single-token continuation steps see only past keys anyway
        causal = t > 1 and not had_prior
        out = F.scaled_dot_product_attention(
            q, k, v, is_causal=causal, dropout_p=self.dropout if self.training else 0.0
        )
        return self.proj(out.transpose(1, 2).reshape(b, t, d))


class CrossAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.q = nn.Linear(d_model, d_model)
        self.kv = nn.Linear(d_model, 2 * d_model)
        self.proj = nn.Linear(d_model, d_model)
        self.dropout = dropout

    def memory_kv(self, memory: torch.Tensor):
        b, m, d = memory.shape
        k, v = self.kv(memory).chunk(2, dim=-1)
        shape = (b, m, self.n_heads, d // self.n_heads)
        return k.view(shape).transpose(1, 2), v.view(shape).transpose(1, 2)

    def forward(self, x: torch.Tensor, kv: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
        b, t, d = x.shape
        q = self.q(x).view(b, t, self.n_heads, d // self.n_heads).transpose(1, 2)
        k, v = kv
        out = F.scaled_dot_product_attention(
            q, k, v, dropout_p=self.dropout if self.training else 0.0
        )
        return self.proj(out.transpose(1, 2).reshape(b, t, d))


class DecoderBlock(nn.Module):
    def __init__(self, config: SeqTrainConfig):
        super().__init__()
        d, h, p = config.d_model, config.n_heads, config.dropout
        self.ln1 = nn.LayerNorm(d)
        self.self_attn = SelfAttention(d, h, p)
        self.ln2 = nn.LayerNorm(d)
        self.cross_attn = CrossAttention(d, h, p)
        self.ln3 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(
            nn.Linear(d, 4 * d), nn.GELU(), nn.Linear(4 * d, d), nn.Dropout(p)
        )

    def forward(self, x, memory_kv, cache=None):
        x = x + self.self_attn(self.ln1(x), cache=cache)
        x = x + self.cross_attn(self.ln2(x), memory_kv)
        return x + self.mlp(self.ln3(x))


class StrokeSequenceModel(nn.Module):
    def __init__(self, config: SeqTrainConfig):
        super().__init__()
        self.config = config
        self.vocab = config.vocab
        self.context = ContextEncoder(config)
        self.tok_embed = nn.Embedding(self.vocab.size, config.d_model)
        self.pos_embed = nn.Parameter(torch.zeros(1, config.seq_len, config.d_model))
        nn.init.normal_(self.pos_embed, std=0.02)
        self.blocks = nn.ModuleList(DecoderBlock(config) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, self.vocab.size, bias=False)

    def forward(
        self,
        tokens: torch.Tensor,
        canvas: torch.Tensor,
        texts: list[str] | None,
    ) -> torch.Tensor:
        """Logits over the vocabulary at every input position."""
        if tokens.shape[1] > self.config.seq_len:
            raise ValueError(
                f"sequence length {tokens.shape[1]} exceeds context {self.config.seq_len}"
            )
        memory = self.context(canvas, texts)
        x = self.tok_embed(tokens) + self.pos_embed[:, : tokens.shape[1]]
        for block in self.blocks:
            x = block(x, block.cross_attn.memory_kv(memory))
        return self.head(self.ln_f(x))

    @torch.no_grad()
    def logits_with_cache(self, tokens, position: int, memory_kvs, caches):
        """Next-token logits for an incremental suffix starting at `position`."""
        x = self.tok_embed(tokens) + self.pos_embed[:, position : position + tokens.shape[1]]
        for block, kv, cache in zip(self.blocks, memory_kvs, caches):
            x = block(x, kv, cache=cache)
        return self.head(self.ln_f(x))[:, -1]


# ---------------------------------------------------------------------------
# Loss


def seq_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    vocab: TokenVocab,
    bbox_weight: float,
) -> tuple[torch.Tensor, dict]:
    """Weighted cross entropy: `bbox_weight` on box targets, 1 elsewhere.

    Pad targets are masked out entirely; the loss is the weighted mean over
    the remaining positions. Returns (loss, info) where info flags an
    all-pad (empty) batch.
    """
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_targets = targets.reshape(-1)
    keep = flat_targets != vocab.pad_id
    info = {"n_positions": int(keep.sum()), "empty": not bool(keep.any())}
    if info["empty"]:
        return torch.zeros((), dtype=logits.dtype, requires_grad=logits.requires_grad), info
    flat_logits, flat_targets = flat_logits[keep], flat_targets[keep]
    ce = F.cross_entropy(flat_logits, flat_targets, reduction="none")
    weights = torch.ones_like(ce)
    weights[flat_targets < vocab.bbox_vocab] = bbox_weight
    loss = (ce * weights).sum() / weights.sum()
    return loss, info


def position_accuracy(
    logits: torch.Tensor, targets: torch.Tensor, vocab: TokenVocab
) -> dict:
    """Argmax next-token accuracy split by target kind (pad excluded)."""
    pred = logits.argmax(dim=-1).reshape(-1)
    tgt = targets.reshape(-1)
    keep = tgt != vocab.pad_id
    pred, tgt = pred[keep], tgt[keep]
    is_bbox = tgt < vocab.bbox_vocab
    is_visual = (tgt >= vocab.visual_offset) & (tgt < vocab.start_id)
    out = {"overall": float((pred == tgt).float().mean()) if len(tgt) else 0.0}
    for name, mask in (("bbox", is_bbox), ("visual", is_visual)):
        out[name] = float((pred[mask] == tgt[mask]).float().mean()) if bool(mask.any()) else 0.0
    return out


# ---------------------------------------------------------------------------
# Training


@dataclass
class SeqTrainResult:
    checkpoint_path: Path
    steps: int
    final_accuracy: dict
    metrics_path: Path


def train_seq(
    config: SeqTrainConfig,
    cache: TokenCache,
    canvases: np.ndarray,
    out_dir,
    vq_codebook_size: int | None = None,
    steps: int = 500,
    batch_size: int = 8,
    log_every: int = 25,
    early_stop_accuracy: float | None = None,
) -> SeqTrainResult:
    """Teacher-forced training over a token cache plus per-record canvases.

    ``canvases`` is (N, H, W, 3) uint8, aligned with the cache rows: the
    canvas context each record's strokes continue from.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if vq_codebook_size is not None and vq_codebook_size != cache.vocab.codebook_size:
        raise ValueError(
            f"token cache was built for codebook {cache.vocab.codebook_size}, "
            f"tokenizer checkpoint has {vq_codebook_size}"
        )
    if cache.vocab != config.vocab:
        raise ValueError("cache vocabulary does not match the model configuration")
    if cache.k != config.k or cache.n_max > config.n_max:
        raise ValueError("cache framing (k, n_max) does not fit the model context")

    torch.manual_seed(config.seed)
    model = StrokeSequenceModel(config)
    if config.freeze_encoders:
        for p in model.context.parameters():
            p.requires_grad_(False)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.AdamW(params, lr=config.base_lr, betas=(0.9, 0.95), weight_decay=0.01)
    rng = np.random.default_rng(config.seed)

    tokens_all = torch.from_numpy(cache.tokens.astype(np.int64))
    canvas_all = torch.from_numpy(canvases.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
    texts_all = list(cache.categories)
    n_items = tokens_all.shape[0]

    metrics_path = out_dir / "metrics.jsonl"
    metrics_fh = metrics_path.open("w")
    accuracy: dict = {}
    t0 = time.monotonic()
    step = 0
    for step in range(1, steps + 1):
        warm = min(1.0, step / max(config.warmup_steps, 1))
        anneal = (
            0.5 * (1.0 + math.cos(math.pi * step / steps)) * 0.9 + 0.1
            if config.lr_anneal
            else 1.0
        )
        for group in opt.param_groups:
            group["lr"] = config.base_lr * warm * anneal

        idx = rng.choice(n_items, size=min(batch_size, n_items), replace=False)
        batch_tokens = tokens_all[idx]
        logits = model(
            batch_tokens[:, :-1],
            canvas_all[idx],
            [texts_all[i] for i in idx],
        )
        loss, info = seq_loss(
            logits, batch_tokens[:, 1:], config.vocab, config.bbox_weight
        )
        opt.zero_grad()
        loss.backward()
        opt.step()

        if step % log_every == 0 or step == steps:
            accuracy = position_accuracy(logits.detach(), batch_tokens[:, 1:], config.vocab)
            entry = {
                "step": step,
                "loss": float(loss.detach()),
                "elapsed_s": round(time.monotonic() - t0, 2),
                **{f"acc_{k}": v for k, v in accuracy.items()},
            }
            metrics_fh.write(json.dumps(entry) + "\n")
            metrics_fh.flush()
            if (
                early_stop_accuracy is not None
                and accuracy["overall"] >= early_stop_accuracy
            ):
                break

    metrics_fh.close()
    ckpt = out_dir / "seq.pt"
    save_seq_checkpoint(model, ckpt, step=step)
    return SeqTrainResult(
        checkpoint_path=ckpt, steps=step, final_accuracy=accuracy, metrics_path=metrics_path
    )


@torch.no_grad()
def dataset_accuracy(model: StrokeSequenceModel, cache: TokenCache, canvases: np.ndarray, batch_size: int = 8) -> dict:
    """Teacher-forced next-token accuracy over a full cached dataset."""
    model.eval()
    tokens_all = torch.from_numpy(cache.tokens.astype(np.int64))
    canvas_all = torch.from_numpy(canvases.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
    hits = {"overall": [0, 0], "bbox": [0, 0], "visual": [0, 0]}
    vocab = model.vocab
    for i in range(0, tokens_all.shape[0], batch_size):
        toks = tokens_all[i : i + batch_size]
        logits = model(toks[:, :-1], canvas_all[i : i + batch_size], cache.categories[i : i + batch_size])
        pred = logits.argmax(dim=-1).reshape(-1)
        tgt = toks[:, 1:].reshape(-1)
        keep = tgt != vocab.pad_id
        pred, tgt = pred[keep], tgt[keep]
        masks = {
            "overall": torch.ones_like(tgt, dtype=torch.bool),
            "bbox": tgt < vocab.bbox_vocab,
            "visual": (tgt >= vocab.visual_offset) & (tgt < vocab.start_id),
        }
        for name, mask in masks.items():
            hits[name][0] += int((pred[mask] == tgt[mask]).sum())
            hits[name][1] += int(mask.sum())
    return {name: (h / max(t, 1)) for name, (h, t) in hits.items()}


# ---------------------------------------------------------------------------
# Constrained sampling


@dataclass(frozen=True)
class SuggestionRequest:
    canvas: Canvas
    condition: str | None = None
    prompt_strokes: tuple | None = None  # ((BBoxTokens, codes), ...)
    prompt_bbox: BBoxTokens | None = None
    n: int = 1
    temperature: float = 1.0
    top_k: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("must request at least one stroke")
        if self.prompt_bbox is not None and self.prompt_strokes:
            raise ValueError("prompt box and prompt strokes are mutually exclusive")


@dataclass(frozen=True)
class SampledStroke:
    box_tokens: BBoxTokens
    visual_codes: np.ndarray
    stroke: Hyperstroke


def _bbox_logit_mask(vocab: TokenVocab, size: int, greater_than: int | None):
    """Allow only box corners: 0..C-1 for leading edges, gt+1..C for trailing."""
    mask = torch.full((size,), float("-inf"))
    if greater_than is None:
        mask[0 : vocab.grid_c] = 0.0
    else:
        mask[greater_than + 1 : vocab.grid_c + 1] = 0.0
    return mask


def _sample_from_logits(logits, temperature, top_k, generator):
    if temperature <= 0.0:
        return int(logits.argmax())
    logits = logits / temperature
    if top_k and top_k < logits.shape[-1]:
        kth = torch.topk(logits, top_k).values[-1]
        logits = logits.masked_fill(logits < kth, float("-inf"))
    probs = F.softmax(logits, dim=-1)
    return int(torch.multinomial(probs, 1, generator=generator))


def sample(
    model: StrokeSequenceModel,
    vq,
    request: SuggestionRequest,
    grid: GridSpec | None = None,
) -> list[SampledStroke]:
    """Emit n structurally valid strokes for a canvas, decoded to pixels.

    Box positions are masked to box tokens with X1 < X2 and Y1 < Y2 forced;
    visual positions are masked to codebook indices. A prompt box fixes the
    first stroke's corners; prompt strokes become a decoder prefix.
    """
    config = model.config
    vocab = model.vocab
    if grid is None:
        grid = GridSpec(request.canvas.width, request.canvas.height, config.grid_c)
    prompt = list(request.prompt_strokes or ())
    total_strokes = len(prompt) + request.n
    if 1 + total_strokes * (4 + config.k) > config.seq_len:
        raise ValueError(
            f"{total_strokes} strokes exceed the model context of {config.n_max}"
        )

    model.eval()
    generator = torch.Generator().manual_seed(request.seed)
    size = vocab.size
    visual_mask = torch.full((size,), float("-inf"))
    visual_mask[vocab.visual_offset : vocab.visual_offset + vocab.codebook_size] = 0.0

    with torch.no_grad():
        texts = [request.condition] if request.condition is not None else None
        memory = model.context(canvas_to_tensor(request.canvas)[None], texts)
        memory_kvs = [b.cross_attn.memory_kv(memory) for b in model.blocks]
        caches = [{} for _ in model.blocks]

        ids = [vocab.start_id]
        for prompt_box, prompt_codes in prompt:
            ids.extend(vocab.stroke_ids(prompt_box, prompt_codes))
        # prime the cache on the whole prefix
        tokens = torch.tensor([ids], dtype=torch.long)
        logits = model.logits_with_cache(tokens, 0, memory_kvs, caches)

        out: list[SampledStroke] = []
        position = len(ids)
        for j in range(request.n):
            corners: list[int] = []
            codes: list[int] = []
            forced_box = request.prompt_bbox if j == 0 else None
            for r in range(4 + config.k):
                if r < 4 and forced_box is not None:
                    next_id = vocab.bbox_id(forced_box.as_tuple()[r])
                elif r < 4:
                    prev = corners[r - 2] if r >= 2 else None
                    mask = _bbox_logit_mask(vocab, size, prev)
                    next_id = _sample_from_logits(
                        logits[0] + mask, request.temperature, request.top_k, generator
                    )
                else:
                    next_id = _sample_from_logits(
                        logits[0] + visual_mask,
                        request.temperature,
                        request.top_k,
                        generator,
                    )
                if r < 4:
                    corners.append(vocab.kind_of(next_id)[1])
                else:
                    codes.append(vocab.kind_of(next_id)[1])
                step_tokens = torch.tensor([[next_id]], dtype=torch.long)
                logits = model.logits_with_cache(step_tokens, position, memory_kvs, caches)
                position += 1
            box = BBoxTokens(*corners, grid_c=vocab.grid_c)
            pixel_box = unsnap_box(box, grid)
            image = vq.decode(np.asarray(codes, dtype=np.int64))
            out.append(
                SampledStroke(
                    box_tokens=box,
                    visual_codes=np.asarray(codes, dtype=np.int64),
                    stroke=Hyperstroke(image=image, box=pixel_box, resized=True),
                )
            )
    return out


def render_suggestions(canvas: Canvas, strokes) -> list[Canvas]:
    """Cumulative composites: previews of the canvas after each stroke."""
    previews = []
    cur = canvas
    for sampled in strokes:
        stroke = sampled.stroke if isinstance(sampled, SampledStroke) else sampled
        cur = blend(cur, stroke)
        previews.append(cur)
    return previews


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_FORMAT_VERSION = 1


def save_seq_checkpoint(model: StrokeSequenceModel, path, step: int = 0) -> None:
    cfg = dataclasses.asdict(model.config)
    payload = {
        "kind": "seq",
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config_json": json.dumps(cfg),
        "step": step,
        "model": model.state_dict(),
    }
    torch.save(payload, path)


def load_seq_checkpoint(path) -> tuple[StrokeSequenceModel, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "seq":
        raise ValueError(f"{path} is not a sequence-model checkpoint")
    config = SeqTrainConfig(**json.loads(payload["config_json"]))
    model = StrokeSequenceModel(config)
    model.load_state_dict(payload["model"])
    model.eval()
    meta = {"step": payload["step"], "format_version": payload["format_version"]}
    return model, meta


def checkpoint_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
