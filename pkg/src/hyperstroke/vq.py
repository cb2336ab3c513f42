"""VQ stroke tokenizer: frame-pair encoder, codebook, 4-channel stroke decoder.

The encoder consumes the channel-wise concatenation of two consecutive canvas
frames (6 channels) and the decoder reconstructs the RGBA stroke that turns
the first frame into the second. Supervision is mixed per item:

  implicit  the decoded stroke is alpha-blended onto the `before` patch and
            the composite is compared against the `after` patch, so no
            ground-truth stroke is ever needed (timelapse pairs);
  direct    the decoded stroke is compared against a stored ground-truth RGBA
            stroke (synthetic pairs), which anchors what the alpha channel
            means early in training.

Quantization is plain nearest-neighbor lookup with a straight-through
gradient; ties go to the lowest codebook index. An optional patch
discriminator adds an adversarial term on the 3-channel composites.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .raster import (
    AlphaImage,
    BBox,
    GridSpec,
    crop_and_resize,
    read_alpha_png,
    read_canvas_png,
    resize_bilinear,
    snap_box,
    unsnap_box,
)
from .synth import read_manifest


@dataclass(frozen=True)
class VQConfig:
    patch_width: int = 256
    patch_height: int = 256
    downsample: int = 16
    codebook_size: int = 8192
    embed_dim: int = 256
    channels: tuple[int, ...] = (64, 128, 128, 256, 256)
    commitment_weight: float = 1.0
    gan_weight: float = 1.0
    gan_start_step: int = 10_000
    disc_channels: int = 32
    base_lr: float = 4.5e-6
    warmup_steps: int = 200
    # encoder/codebook move slower than the decoder: quantizer assignments
    # stay quasi-stationary, which small-data runs need to avoid churn
    encoder_lr_scale: float = 1.0
    codebook_lr_scale: float = 1.0
    adam_betas: tuple[float, float] = (0.5, 0.9)
    grid_c: int = 16
    perceptual: str = "none"
    dead_code_steps: int = 2000
    seed: int = 0

    def __post_init__(self):
        f = self.downsample
        if f < 1 or (f & (f - 1)):
            raise ValueError("downsample factor must be a power of two")
        if self.patch_width % f or self.patch_height % f:
            raise ValueError("patch dims must be divisible by the downsample factor")
        if len(self.channels) != int(math.log2(f)) + 1:
            raise ValueError(
                f"need {int(math.log2(f)) + 1} channel widths for downsample {f}"
            )

    @property
    def k(self) -> int:
        return (self.patch_width // self.downsample) * (
            self.patch_height // self.downsample
        )

    @property
    def latent_hw(self) -> tuple[int, int]:
        return (self.patch_height // self.downsample, self.patch_width // self.downsample)

    @staticmethod
    def paper_artistic() -> "VQConfig":
        """Reference full-scale configuration for the 256px artistic model."""
        return VQConfig()

    @staticmethod
    def paper_sketch() -> "VQConfig":
        """Reference full-scale configuration for the 128px sketch model."""
        return VQConfig(
            patch_width=128,
            patch_height=128,
            codebook_size=2048,
            base_lr=2e-7,
            channels=(64, 128, 128, 256, 256),
        )

    @staticmethod
    def desk(codebook_size: int = 512, seed: int = 0) -> "VQConfig":
        """Small CPU-trainable configuration for tests and demos."""
        return VQConfig(
            patch_width=128,
            patch_height=128,
            codebook_size=codebook_size,
            embed_dim=64,
            channels=(16, 32, 64, 96, 128),
            gan_weight=0.0,
            gan_start_step=0,
            disc_channels=16,
            base_lr=5e-3,
            warmup_steps=50,
            encoder_lr_scale=0.1,
            codebook_lr_scale=0.1,
            adam_betas=(0.9, 0.95),
            dead_code_steps=100,
            seed=seed,
        )


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(math.gcd(channels, 8), channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm2 = nn.GroupNorm(math.gcd(channels, 8), channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


class Encoder(nn.Module):
    """6-channel frame-pair input down to an embed_dim latent grid."""

    def __init__(self, config: VQConfig):
        super().__init__()
        chans = config.channels
        layers: list[nn.Module] = [nn.Conv2d(6, chans[0], 3, padding=1)]
        for c_in, c_out in zip(chans[:-1], chans[1:]):
            layers.append(ResBlock(c_in))
            layers.append(nn.Conv2d(c_in, c_out, 4, stride=2, padding=1))
        layers += [
            ResBlock(chans[-1]),
            nn.GroupNorm(math.gcd(chans[-1], 8), chans[-1]),
            nn.SiLU(),
            nn.Conv2d(chans[-1], config.embed_dim, 1),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class Decoder(nn.Module):
    """Latent grid back to an RGBA stroke patch in [0, 1]."""

    def __init__(self, config: VQConfig):
        super().__init__()
        chans = tuple(reversed(config.channels))
        layers: list[nn.Module] = [
            nn.Conv2d(config.embed_dim, chans[0], 1),
            ResBlock(chans[0]),
        ]
        for c_in, c_out in zip(chans[:-1], chans[1:]):
            layers.append(nn.Upsample(scale_factor=2, mode="nearest"))
            layers.append(nn.Conv2d(c_in, c_out, 3, padding=1))
            layers.append(ResBlock(c_out))
        layers += [
            nn.GroupNorm(math.gcd(chans[-1], 8), chans[-1]),
            nn.SiLU(),
            nn.Conv2d(chans[-1], 4, 3, padding=1),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, z):
        return torch.sigmoid(self.net(z))


class Quantizer(nn.Module):
    """Nearest-neighbor codebook lookup with straight-through gradients."""

    def __init__(self, codebook_size: int, embed_dim: int):
        super().__init__()
        self.codebook = nn.Parameter(torch.empty(codebook_size, embed_dim))
        nn.init.uniform_(self.codebook, -1.0 / codebook_size, 1.0 / codebook_size)
        self.register_buffer("usage", torch.zeros(codebook_size, dtype=torch.long))

    def lookup(self, z_e: torch.Tensor) -> torch.Tensor:
        """Indices of the closest codebook entries; ties take the lowest index."""
        b, d, h, w = z_e.shape
        flat = z_e.permute(0, 2, 3, 1).reshape(-1, d)
        dists = (
            flat.pow(2).sum(1, keepdim=True)
            - 2.0 * flat @ self.codebook.t()
            + self.codebook.pow(2).sum(1)[None, :]
        )
        return dists.argmin(dim=1).reshape(b, h, w)

    def embed(self, codes: torch.Tensor) -> torch.Tensor:
        """(B, H, W) indices to a (B, D, H, W) latent grid."""
        return self.codebook[codes].permute(0, 3, 1, 2).contiguous()

    def forward(self, z_e: torch.Tensor):
        codes = self.lookup(z_e)
        z_q = self.embed(codes)
        if self.training:
            self.usage.index_add_(
                0, codes.reshape(-1), torch.ones_like(codes.reshape(-1))
            )
        z_q_st = z_e + (z_q - z_e).detach()  # straight-through
        return z_q_st, z_q, codes


class PatchDiscriminator(nn.Module):
    """Convolutional classifier emitting a grid of real/fake logits."""

    def __init__(self, channels: int = 32):
        super().__init__()
        c = channels
        self.net = nn.Sequential(
            nn.Conv2d(3, c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 1, 3, padding=1),
        )

    def forward(self, x):
        return self.net(x)


class VQModel(nn.Module):
    def __init__(self, config: VQConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.quantizer = Quantizer(config.codebook_size, config.embed_dim)
        self.decoder = Decoder(config)

    # -- training-path tensors -------------------------------------------

    def forward(self, pair6: torch.Tensor):
        z_e = self.encoder(pair6)
        z_q_st, z_q, codes = self.quantizer(z_e)
        decoded = self.decoder(z_q_st)
        return VQOutputs(decoded=decoded, z_e=z_e, z_q=z_q, codes=codes)

    # -- numpy inference surface ------------------------------------------

    @property
    def codebook_size(self) -> int:
        return self.config.codebook_size

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def patch_width(self) -> int:
        return self.config.patch_width

    @property
    def patch_height(self) -> int:
        return self.config.patch_height

    @torch.no_grad()
    def encode(self, before: np.ndarray, after: np.ndarray) -> np.ndarray:
        """Row-major visual token indices for one (before, after) patch pair."""
        for name, patch in (("before", before), ("after", after)):
            if patch.shape != (self.patch_height, self.patch_width, 3):
                raise ValueError(
                    f"{name} patch must be {self.patch_height}x{self.patch_width}x3, "
                    f"got {patch.shape}"
                )
        was_training = self.training
        self.eval()
        pair = np.concatenate([before, after], axis=2).astype(np.float32)
        x = torch.from_numpy(pair).permute(2, 0, 1)[None]
        codes = self.quantizer.lookup(self.encoder(x))
        self.train(was_training)
        return codes.reshape(-1).numpy().astype(np.int64)

    @torch.no_grad()
    def decode(self, codes: np.ndarray) -> AlphaImage:
        """RGBA stroke patch for k visual token indices."""
        codes = np.asarray(codes, dtype=np.int64).reshape(-1)
        if codes.shape[0] != self.k:
            raise ValueError(f"expected {self.k} tokens, got {codes.shape[0]}")
        if codes.min() < 0 or codes.max() >= self.codebook_size:
            raise ValueError("token index outside codebook range")
        was_training = self.training
        self.eval()
        h, w = self.config.latent_hw
        grid = torch.from_numpy(codes).reshape(1, h, w)
        decoded = self.decoder(self.quantizer.embed(grid))
        self.train(was_training)
        rgba = decoded[0].permute(1, 2, 0).numpy().astype(np.float64)
        return AlphaImage.from_rgba(np.clip(rgba, 0.0, 1.0))


@dataclass
class VQOutputs:
    decoded: torch.Tensor  # (B, 4, H, W)
    z_e: torch.Tensor
    z_q: torch.Tensor
    codes: torch.Tensor


@dataclass
class TrainBatch:
    """Patch pairs plus per-item supervision kind.

    ``gt`` rows are meaningful only where ``is_direct`` is set; implicit items
    carry no ground-truth stroke.
    """

    before: torch.Tensor  # (B, 3, H, W)
    after: torch.Tensor  # (B, 3, H, W)
    is_direct: torch.Tensor  # (B,) bool
    gt: torch.Tensor | None = None  # (B, 4, H, W)

    def __post_init__(self):
        if bool(self.is_direct.any()) and self.gt is None:
            raise ValueError("direct supervision requires ground-truth strokes")


def composite(before_rgb: torch.Tensor, stroke_rgba: torch.Tensor) -> torch.Tensor:
    """Differentiable full-patch blend of a decoded stroke onto a frame."""
    rgb, alpha = stroke_rgba[:, :3], stroke_rgba[:, 3:4]
    return rgb * alpha + before_rgb * (1.0 - alpha)


def vq_loss(
    outputs: VQOutputs,
    batch: TrainBatch,
    commitment_weight: float = 1.0,
    perceptual=None,
) -> tuple[torch.Tensor, dict]:
    """Reconstruction + codebook + commitment objective with logged parts.

    The total always equals the sum of the returned components exactly.
    """
    b = outputs.decoded.shape[0]
    per_item = torch.zeros(b, dtype=outputs.decoded.dtype)
    is_direct = batch.is_direct
    if bool((~is_direct).any()):
        comp = composite(batch.before[~is_direct], outputs.decoded[~is_direct])
        per_item[~is_direct] = (
            (comp - batch.after[~is_direct]).pow(2).mean(dim=(1, 2, 3))
        )
    if bool(is_direct.any()):
        if batch.gt is None:
            raise ValueError("direct supervision requires ground-truth strokes")
        per_item[is_direct] = (
            (outputs.decoded[is_direct] - batch.gt[is_direct]).pow(2).mean(dim=(1, 2, 3))
        )
    rec_implicit = per_item[~is_direct].sum() / b
    rec_direct = per_item[is_direct].sum() / b

    codebook_term = (outputs.z_q - outputs.z_e.detach()).pow(2).mean()
    commitment_term = commitment_weight * (
        (outputs.z_q.detach() - outputs.z_e).pow(2).mean()
    )

    perceptual_term = torch.zeros((), dtype=outputs.decoded.dtype)
    if perceptual is not None:
        fake = composite(batch.before, outputs.decoded)
        perceptual_term = perceptual(fake, batch.after)

    total = rec_implicit + rec_direct + codebook_term + commitment_term + perceptual_term
    components = {
        "rec_implicit": float(rec_implicit.detach()),
        "rec_direct": float(rec_direct.detach()),
        "codebook": float(codebook_term.detach()),
        "commitment": float(commitment_term.detach()),
        "perceptual": float(perceptual_term.detach()),
    }
    return total, components


def gan_loss(
    disc: nn.Module,
    real: torch.Tensor,
    fake: torch.Tensor,
    step: int = 0,
    gan_start_step: int = 0,
):
    """Vanilla adversarial pair: log D(real) + log(1 - D(fake)).

    Returns (d_loss, g_loss), both as values to minimize; the discriminator
    sees the fake detached. The generator term is zero before the start step.
    """
    if real.shape != fake.shape:
        raise ValueError(f"real {tuple(real.shape)} != fake {tuple(fake.shape)}")
    real_logits = disc(real)
    fake_logits_d = disc(fake.detach())
    d_loss = -(
        F.logsigmoid(real_logits).mean() + F.logsigmoid(-fake_logits_d).mean()
    )
    if step < gan_start_step:
        g_loss = torch.zeros((), dtype=fake.dtype)
    else:
        # generator minimizes log(1 - D(fake))
        g_loss = F.logsigmoid(-disc(fake)).mean()
    return d_loss, g_loss


# Pluggable feature-distance providers for the perceptual reconstruction term.
# Desk-scale training runs with "none"; external-weight backends register here.
PERCEPTUAL_PROVIDERS: dict[str, object] = {"none": None}


def make_perceptual(name: str):
    if name not in PERCEPTUAL_PROVIDERS:
        raise KeyError(
            f"unknown perceptual provider {name!r}; have {sorted(PERCEPTUAL_PROVIDERS)}"
        )
    return PERCEPTUAL_PROVIDERS[name]


# ---------------------------------------------------------------------------
# Dataset assembly from manifests


def load_patch_items(manifest_path, config: VQConfig) -> TrainBatch:
    """Materialize every manifest record as fixed-size patch tensors.

    Desk-scale datasets fit in memory, so items are built once up front.
    Boxes are snapped to the canvas grid, both frames are cropped and resized
    to the patch resolution, and direct items get their ground-truth stroke
    placed into the snapped box (padded with the stroke color at zero alpha)
    before the same resize.
    """
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    records = read_manifest(manifest_path)
    if not records:
        raise ValueError(f"manifest {manifest_path} is empty")
    befores, afters, gts, kinds = [], [], [], []
    target = (config.patch_width, config.patch_height)
    for rec in records:
        before = read_canvas_png(root / rec.before)
        after = read_canvas_png(root / rec.after)
        grid = GridSpec(before.width, before.height, config.grid_c)
        box = BBox(*rec.box)
        tokens = snap_box(box, grid)
        pa, pb = crop_and_resize(before, after, tokens, target)
        befores.append(pa)
        afters.append(pb)
        kinds.append(rec.supervision == "direct")
        if rec.supervision == "direct":
            stroke = read_alpha_png(root / rec.stroke)
            gts.append(_placed_gt_patch(stroke, box, tokens, grid, rec.color, target))
        else:
            gts.append(np.zeros((target[1], target[0], 4)))

    def to_t(arrs):
        return torch.from_numpy(np.stack(arrs).astype(np.float32)).permute(0, 3, 1, 2)

    return TrainBatch(
        before=to_t(befores),
        after=to_t(afters),
        is_direct=torch.tensor(kinds, dtype=torch.bool),
        gt=to_t(gts),
    )


def _placed_gt_patch(stroke, box: BBox, tokens, grid: GridSpec, color, target):
    """Ground-truth stroke placed inside its snapped box, then resized.

    Padding uses the stroke's fill color at zero alpha: constant color keeps
    bilinear resampling from dragging fringe colors into the alpha edge.
    """
    snapped = unsnap_box(tokens, grid)
    rgba = np.zeros((snapped.height, snapped.width, 4), dtype=np.float64)
    if color is not None:
        rgba[:, :, :3] = np.asarray(color, dtype=np.float64)
    oy, ox = box.y1 - snapped.y1, box.x1 - snapped.x1
    rgba[oy : oy + stroke.height, ox : ox + stroke.width, :3] = stroke.rgb
    rgba[oy : oy + stroke.height, ox : ox + stroke.width, 3] = stroke.alpha
    return resize_bilinear(rgba, target[0], target[1])


# ---------------------------------------------------------------------------
# Training


@dataclass
class VQTrainResult:
    checkpoint_path: Path
    steps: int
    final_psnr: float
    metrics_path: Path


def train_vq(
    config: VQConfig,
    manifest_paths,
    out_dir,
    steps: int = 2000,
    batch_size: int = 8,
    log_every: int = 50,
    eval_every: int = 100,
    early_stop_psnr: float | None = None,
    seed_codebook_from_data: bool = True,
) -> VQTrainResult:
    """Train the tokenizer on mixed direct/implicit manifests.

    Writes `vq.pt` (single-file checkpoint) and `metrics.jsonl` to out_dir.
    Aborts with a diagnostic dump if the loss goes non-finite.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)

    if isinstance(manifest_paths, (str, Path)):
        manifest_paths = [manifest_paths]
    datasets = [load_patch_items(p, config) for p in manifest_paths]
    data = TrainBatch(
        before=torch.cat([d.before for d in datasets]),
        after=torch.cat([d.after for d in datasets]),
        is_direct=torch.cat([d.is_direct for d in datasets]),
        gt=torch.cat([d.gt for d in datasets]),
    )
    n_items = data.before.shape[0]

    model = VQModel(config)
    disc = PatchDiscriminator(config.disc_channels) if config.gan_weight > 0 else None
    perceptual = make_perceptual(config.perceptual)
    betas = tuple(config.adam_betas)
    opt = torch.optim.Adam(
        [
            {"params": model.decoder.parameters(), "scale": 1.0},
            {"params": model.encoder.parameters(), "scale": config.encoder_lr_scale},
            {"params": model.quantizer.parameters(), "scale": config.codebook_lr_scale},
        ],
        lr=config.base_lr,
        betas=betas,
    )
    opt_d = (
        torch.optim.Adam(disc.parameters(), lr=config.base_lr, betas=betas)
        if disc is not None
        else None
    )
    rng = np.random.default_rng(config.seed)

    if seed_codebook_from_data:
        _seed_codebook(model, data, rng)

    metrics_path = out_dir / "metrics.jsonl"
    metrics_fh = metrics_path.open("w")
    usage_snapshot = model.quantizer.usage.clone()
    best_psnr = -math.inf
    t0 = time.monotonic()
    step = 0
    for step in range(1, steps + 1):
        lr = config.base_lr * min(1.0, step / max(config.warmup_steps, 1))
        for group in opt.param_groups:
            group["lr"] = lr * group["scale"]

        idx = torch.from_numpy(rng.choice(n_items, size=min(batch_size, n_items), replace=False))
        batch = TrainBatch(
            before=data.before[idx],
            after=data.after[idx],
            is_direct=data.is_direct[idx],
            gt=data.gt[idx],
        )
        pair6 = torch.cat([batch.before, batch.after], dim=1)
        outputs = model(pair6)
        total, components = vq_loss(
            outputs, batch, commitment_weight=config.commitment_weight, perceptual=perceptual
        )

        loss = total
        d_loss = None
        if disc is not None and step >= config.gan_start_step:
            fake = composite(batch.before, outputs.decoded)
            d_loss, g_loss = gan_loss(
                disc, batch.after, fake, step=step, gan_start_step=config.gan_start_step
            )
            loss = total + config.gan_weight * g_loss
            components["gan_g"] = float(g_loss.detach())

        if not torch.isfinite(loss):
            dump = out_dir / f"nan_batch_step{step}.json"
            dump.write_text(
                json.dumps(
                    {
                        "step": step,
                        "components": components,
                        "batch_indices": idx.tolist(),
                        "before_stats": [float(batch.before.min()), float(batch.before.max())],
                    }
                )
            )
            metrics_fh.close()
            raise FloatingPointError(f"non-finite loss at step {step}; batch dumped to {dump}")

        opt.zero_grad()
        if disc is not None:
            opt_d.zero_grad()  # generator backward also writes disc grads
        loss.backward()
        opt.step()

        if d_loss is not None:
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

        if config.dead_code_steps and step % config.dead_code_steps == 0:
            _reseed_dead_codes(model, usage_snapshot, outputs.z_e.detach(), rng)
            usage_snapshot = model.quantizer.usage.clone()

        if step % log_every == 0 or step == steps:
            used = int((model.quantizer.usage > 0).sum())
            entry = {
                "step": step,
                "loss": float(loss.detach()),
                "lr": lr,
                "codebook_used": used,
                "elapsed_s": round(time.monotonic() - t0, 2),
                **components,
            }
            metrics_fh.write(json.dumps(entry) + "\n")
            metrics_fh.flush()

        if eval_every and (step % eval_every == 0 or step == steps):
            best_psnr = max(best_psnr, dataset_composite_psnr(model, data))
            if early_stop_psnr is not None and best_psnr >= early_stop_psnr:
                break

    metrics_fh.close()
    final_psnr = dataset_composite_psnr(model, data)
    ckpt = out_dir / "vq.pt"
    save_vq_checkpoint(model, ckpt, disc=disc, step=step)
    return VQTrainResult(
        checkpoint_path=ckpt, steps=step, final_psnr=final_psnr, metrics_path=metrics_path
    )


def _seed_codebook(model: VQModel, data: TrainBatch, rng) -> None:
    """Initialize codebook entries from encoder outputs on real items."""
    with torch.no_grad():
        n = min(data.before.shape[0], 32)
        pair6 = torch.cat([data.before[:n], data.after[:n]], dim=1)
        z = model.encoder(pair6).permute(0, 2, 3, 1).reshape(-1, model.config.embed_dim)
        k = model.config.codebook_size
        idx = rng.choice(z.shape[0], size=k, replace=z.shape[0] < k)
        noise = torch.randn(k, model.config.embed_dim) * 0.01
        model.quantizer.codebook.copy_(z[torch.from_numpy(idx)] + noise)


def _reseed_dead_codes(model: VQModel, usage_before, z_e: torch.Tensor, rng) -> None:
    with torch.no_grad():
        delta = model.quantizer.usage - usage_before
        dead = torch.nonzero(delta == 0).reshape(-1)
        if dead.numel() == 0:
            return
        flat = z_e.permute(0, 2, 3, 1).reshape(-1, z_e.shape[1])
        idx = rng.choice(flat.shape[0], size=dead.numel(), replace=flat.shape[0] < dead.numel())
        model.quantizer.codebook[dead] = flat[torch.from_numpy(idx)]


@torch.no_grad()
def dataset_composite_psnr(model: VQModel, data: TrainBatch, batch_size: int = 8) -> float:
    """PSNR of blended reconstructions against `after` over a whole dataset."""
    was_training = model.training
    model.eval()
    errs = []
    for i in range(0, data.before.shape[0], batch_size):
        before = data.before[i : i + batch_size]
        after = data.after[i : i + batch_size]
        outputs = model(torch.cat([before, after], dim=1))
        comp = composite(before, outputs.decoded)
        errs.append((comp - after).pow(2).mean(dim=(1, 2, 3)))
    model.train(was_training)
    mse = float(torch.cat(errs).mean())
    return float("inf") if mse == 0 else -10.0 * math.log10(mse)


@torch.no_grad()
def codebook_usage_histogram(model: VQModel, data: TrainBatch, batch_size: int = 8) -> np.ndarray:
    was_training = model.training
    model.eval()
    counts = np.zeros(model.config.codebook_size, dtype=np.int64)
    for i in range(0, data.before.shape[0], batch_size):
        pair6 = torch.cat(
            [data.before[i : i + batch_size], data.after[i : i + batch_size]], dim=1
        )
        codes = model.quantizer.lookup(model.encoder(pair6))
        np.add.at(counts, codes.reshape(-1).numpy(), 1)
    model.train(was_training)
    return counts


# ---------------------------------------------------------------------------
# Checkpoints: single-file archive with an embedded JSON config block

CHECKPOINT_FORMAT_VERSION = 1


def save_vq_checkpoint(model: VQModel, path, disc=None, step: int = 0) -> None:
    cfg = dataclasses.asdict(model.config)
    payload = {
        "kind": "vq",
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config_json": json.dumps(cfg),
        "step": step,
        "model": model.state_dict(),
        "disc": disc.state_dict() if disc is not None else None,
    }
    torch.save(payload, path)


def load_vq_checkpoint(path) -> tuple[VQModel, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "vq":
        raise ValueError(f"{path} is not a VQ checkpoint")
    cfg_dict = json.loads(payload["config_json"])
    cfg_dict["channels"] = tuple(cfg_dict["channels"])
    cfg_dict["adam_betas"] = tuple(cfg_dict["adam_betas"])
    config = VQConfig(**cfg_dict)
    model = VQModel(config)
    model.load_state_dict(payload["model"])
    model.eval()
    meta = {"step": payload["step"], "format_version": payload["format_version"]}
    return model, meta
