"""Stage 1: part-wise motion VAE over 6D rotation features.

Three temporal-convolutional VAEs (upper body, hands, lower body) learn
continuous per-frame latents. Reconstruction is scored on the rotation
manifold (geodesic angle) plus L1 velocity/acceleration terms; latents are
regularized toward a unit Gaussian and, in the aligned variants, pulled
toward frozen audio/text embeddings with a four-term contrastive loss.

A vector-quantized autoencoder with the same backbone serves as the
discrete baseline for the continuous-vs-discrete comparison.
"""

from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from . import containers
from .config import ExperimentConfig, VaeSettings
from .motion import BodyPartition

VARIANTS = ("vae", "mt", "ma", "mta", "vq")
_TERMS_BY_VARIANT = {
    "vae": (),
    "mt": ("m2t", "t2m"),
    "ma": ("m2a", "a2m"),
    "mta": ("m2a", "a2m", "m2t", "t2m"),
    "vq": (),
}


class EncoderOutput(NamedTuple):
    mu: torch.Tensor
    logvar: torch.Tensor


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; carries the last finite state."""

    def __init__(self, message: str, last_good_state: dict):
        super().__init__(message)
        self.last_good_state = last_good_state


def rotation_from_6d(features: torch.Tensor, degenerate_tol: float = 1e-6):
    """Gram-Schmidt (..., 6) -> (..., 3, 3); near-parallel columns fall back
    to the identity rotation. Returns (matrices, degenerate mask)."""
    a = features[..., 0:3]
    b = features[..., 3:6]
    degenerate = torch.linalg.cross(a, b, dim=-1).norm(dim=-1) < degenerate_tol
    if degenerate.any():
        a = torch.where(degenerate[..., None], features.new_tensor([1.0, 0.0, 0.0]), a)
        b = torch.where(degenerate[..., None], features.new_tensor([0.0, 1.0, 0.0]), b)
    b1 = a / a.norm(dim=-1, keepdim=True)
    b2 = b - (b * b1).sum(dim=-1, keepdim=True) * b1
    b2 = b2 / b2.norm(dim=-1, keepdim=True)
    b3 = torch.linalg.cross(b1, b2, dim=-1)
    return torch.stack([b1, b2, b3], dim=-1), degenerate


def geodesic_loss(m: torch.Tensor, m_hat: torch.Tensor,
                  clamp_delta: float = 1e-6) -> torch.Tensor:
    """Mean rotation angle between two (..., 6) feature tensors."""
    if m.shape != m_hat.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {m_hat.shape}")
    r, deg_a = rotation_from_6d(m)
    r_hat, deg_b = rotation_from_6d(m_hat)
    n_degenerate = int(deg_a.sum() + deg_b.sum())
    if n_degenerate:
        warnings.warn(
            f"geodesic_loss: {n_degenerate} degenerate 6D features replaced "
            "with the identity rotation",
            RuntimeWarning,
            stacklevel=2,
        )
    trace = (r * r_hat).sum(dim=(-2, -1))  # tr(R R_hat^T)
    cos = ((trace - 1.0) / 2.0).clamp(-1.0 + clamp_delta, 1.0 - clamp_delta)
    return torch.arccos(cos).mean()


def motion_loss(m: torch.Tensor, m_hat: torch.Tensor, fps: float) -> torch.Tensor:
    """Geodesic reconstruction plus L1 on fps-scaled velocity and acceleration."""
    if m.shape[-3] < 3:
        raise ValueError("need at least 3 frames for the acceleration term")
    rec = geodesic_loss(m, m_hat)
    vel = torch.diff(m, dim=-3) * fps
    vel_hat = torch.diff(m_hat, dim=-3) * fps
    acc = torch.diff(m, n=2, dim=-3) * fps**2
    acc_hat = torch.diff(m_hat, n=2, dim=-3) * fps**2
    return rec + (vel - vel_hat).abs().mean() + (acc - acc_hat).abs().mean()


def kl_loss(enc_out: EncoderOutput) -> torch.Tensor:
    """Mean KL divergence of N(mu, exp(logvar)) from the unit Gaussian."""
    mu, logvar = enc_out
    return 0.5 * (logvar.exp() + mu**2 - 1.0 - logvar).mean()


def reparameterize(enc_out: EncoderOutput, generator: torch.Generator | None = None,
                   training: bool = True) -> torch.Tensor:
    """Sample mu + exp(logvar/2) * xi; returns mu exactly in eval mode."""
    mu, logvar = enc_out
    if not training:
        return mu
    noise = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
    return mu + torch.exp(0.5 * logvar) * noise


def contrastive_loss(z_m: torch.Tensor, z_a: torch.Tensor, z_t: torch.Tensor,
                     tau: float = 0.07,
                     terms=("m2a", "a2m", "m2t", "t2m")) -> torch.Tensor:
    """Four-term batch contrastive loss between motion, audio, and text.

    Each term is -(1/2) * sum over matched pairs of the diagonal log-softmax
    of the similarity matrix, row-wise for m2a/m2t and column-wise for
    a2m/t2m. Audio<->text terms are deliberately absent: that alignment is
    owned by the frozen aligner.
    """
    if not (z_m.shape == z_a.shape == z_t.shape):
        raise ValueError(
            f"embedding shapes differ: {z_m.shape}, {z_a.shape}, {z_t.shape}"
        )
    total = z_m.new_zeros(())
    sim_ma = z_m @ z_a.T / tau
    sim_mt = z_m @ z_t.T / tau
    if "m2a" in terms:
        total = total - 0.5 * torch.log_softmax(sim_ma, dim=1).diagonal().sum()
    if "a2m" in terms:
        total = total - 0.5 * torch.log_softmax(sim_ma, dim=0).diagonal().sum()
    if "m2t" in terms:
        total = total - 0.5 * torch.log_softmax(sim_mt, dim=1).diagonal().sum()
    if "t2m" in terms:
        total = total - 0.5 * torch.log_softmax(sim_mt, dim=0).diagonal().sum()
    return total


def total_loss(m, m_hat, enc_out, z_m, z_a, z_t, settings: VaeSettings,
               fps: float) -> torch.Tensor:
    """motion + lambda_c * contrastive + lambda_kl * KL."""
    loss = motion_loss(m, m_hat, fps) + settings.lambda_kl * kl_loss(enc_out)
    terms = _TERMS_BY_VARIANT.get(settings.variant, ())
    if settings.lambda_c > 0 and terms:
        loss = loss + settings.lambda_c * contrastive_loss(
            z_m, z_a, z_t, tau=settings.tau, terms=terms
        )
    return loss


class AttentionPool(nn.Module):
    """Project per-frame latents, attention-pool over time, unit-normalize."""

    def __init__(self, d_in: int, d_out: int, d_att: int = 32):
        super().__init__()
        self.proj = nn.Linear(d_in, d_out)
        self.att = nn.Linear(d_out, d_att)
        self.score = nn.Linear(d_att, 1, bias=False)

    def forward(self, latent: torch.Tensor) -> torch.Tensor:
        """(B, T, d_in) or (T, d_in) -> (B, d_out) or (d_out,) unit vectors."""
        squeeze = latent.dim() == 2
        if squeeze:
            latent = latent.unsqueeze(0)
        h = self.proj(latent)
        scores = self.score(torch.tanh(self.att(h)))  # (B, T, 1)
        weights = torch.softmax(scores, dim=1)
        pooled = (weights * h).sum(dim=1)
        pooled = pooled / pooled.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        return pooled.squeeze(0) if squeeze else pooled


def pool_project(latent: torch.Tensor, pool: AttentionPool) -> torch.Tensor:
    return pool(latent)


def _dilations(n_layers: int) -> tuple[int, ...]:
    return tuple(2**i for i in range(n_layers))


class TcnStack(nn.Module):
    def __init__(self, channels: int, kernel: int, dilations):
        super().__init__()
        self.convs = nn.ModuleList(
            nn.Conv1d(channels, channels, kernel, dilation=d,
                      padding=d * (kernel - 1) // 2)
            for d in dilations
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.convs:
            x = x + torch.nn.functional.gelu(conv(x))
        return x


class TcnEncoder(nn.Module):
    """Temporal conv encoder: (B, T, in_dim) -> per-frame (mu, logvar)."""

    LOGVAR_CLAMP = 10.0

    def __init__(self, in_dim: int, settings: VaeSettings):
        super().__init__()
        dil = _dilations(settings.tcn_layers)
        self.in_proj = nn.Conv1d(in_dim, settings.tcn_channels, 1)
        self.stack = TcnStack(settings.tcn_channels, settings.kernel_size, dil)
        self.mu_head = nn.Conv1d(settings.tcn_channels, settings.d_latent, 1)
        self.logvar_head = nn.Conv1d(settings.tcn_channels, settings.d_latent, 1)
        # frames further apart than this cannot influence each other
        self.half_receptive_field = sum(
            d * (settings.kernel_size - 1) // 2 for d in dil
        )

    def forward(self, x: torch.Tensor) -> EncoderOutput:
        h = self.stack(self.in_proj(x.transpose(-1, -2)))
        mu = self.mu_head(h).transpose(-1, -2)
        logvar = self.logvar_head(h).transpose(-1, -2)
        return EncoderOutput(mu, logvar.clamp(-self.LOGVAR_CLAMP, self.LOGVAR_CLAMP))


class TcnDecoder(nn.Module):
    """Mirror of the encoder: (B, T, d_latent) -> (B, T, out_dim)."""

    def __init__(self, out_dim: int, settings: VaeSettings):
        super().__init__()
        dil = tuple(reversed(_dilations(settings.tcn_layers)))
        self.in_proj = nn.Conv1d(settings.d_latent, settings.tcn_channels, 1)
        self.stack = TcnStack(settings.tcn_channels, settings.kernel_size, dil)
        self.out_proj = nn.Conv1d(settings.tcn_channels, out_dim, 1)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.stack(self.in_proj(z.transpose(-1, -2)))
        return self.out_proj(h).transpose(-1, -2)


class VectorQuantizer(nn.Module):
    """Nearest-neighbor codebook with straight-through gradients and EMA
    updates. Equidistant codes resolve to the lowest index."""

    def __init__(self, n_codes: int, dim: int, commitment: float = 0.25,
                 ema_decay: float = 0.99, ema_eps: float = 1e-5):
        super().__init__()
        if n_codes < 2:
            raise ValueError("need at least 2 codes")
        self.commitment = commitment
        self.ema_decay = ema_decay
        self.ema_eps = ema_eps
        self.register_buffer("codebook", 0.5 * torch.randn(n_codes, dim))
        self.register_buffer("ema_counts", torch.zeros(n_codes))
        self.register_buffer("ema_sums", self.codebook.clone())

    def forward(self, e: torch.Tensor):
        return vq_quantize(e, self.codebook)

    @torch.no_grad()
    def ema_update(self, e: torch.Tensor, indices: torch.Tensor) -> None:
        flat = e.reshape(-1, e.shape[-1])
        one_hot = torch.zeros(
            flat.shape[0], self.codebook.shape[0], dtype=flat.dtype
        )
        one_hot.scatter_(1, indices.reshape(-1, 1), 1.0)
        counts = one_hot.sum(dim=0)
        sums = one_hot.T @ flat
        self.ema_counts.mul_(self.ema_decay).add_(counts, alpha=1 - self.ema_decay)
        self.ema_sums.mul_(self.ema_decay).add_(sums, alpha=1 - self.ema_decay)
        n = self.ema_counts.sum()
        smoothed = (
            (self.ema_counts + self.ema_eps)
            / (n + self.codebook.shape[0] * self.ema_eps)
            * n
        )
        self.codebook.copy_(self.ema_sums / smoothed.unsqueeze(1))


def vq_quantize(latent: torch.Tensor, codebook: torch.Tensor):
    """Nearest-codebook quantization with the straight-through contract.

    Returns (quantized, indices, losses). Gradients with respect to the
    quantized output pass unchanged to the pre-quantization latent; ties on
    distance resolve to the lowest codebook index.
    """
    if codebook.shape[0] < 1:
        raise ValueError("codebook is empty")
    flat = latent.reshape(-1, latent.shape[-1])
    d2 = (
        (flat**2).sum(dim=1, keepdim=True)
        - 2.0 * flat @ codebook.T
        + (codebook**2).sum(dim=1)
    )
    indices = d2.argmin(dim=1)
    quantized = codebook[indices].reshape(latent.shape)
    losses = {
        "commitment": ((latent - quantized.detach()) ** 2).mean(),
        "codebook": ((quantized - latent.detach()) ** 2).mean(),
    }
    quantized = latent + (quantized - latent).detach()  # straight-through
    return quantized, indices.reshape(latent.shape[:-1]), losses


class MotionVae(nn.Module):
    """Three part-wise TCN VAEs plus per-part attention-pooling heads."""

    kind = "continuous"

    def __init__(self, part_dims, settings: VaeSettings, d_align: int):
        super().__init__()
        self.part_dims = tuple(part_dims)
        self.settings = settings
        self.encoders = nn.ModuleList(
            TcnEncoder(dim, settings) for dim in part_dims
        )
        self.decoders = nn.ModuleList(
            TcnDecoder(dim, settings) for dim in part_dims
        )
        self.pools = nn.ModuleList(
            AttentionPool(settings.d_latent, d_align, settings.d_att)
            for _ in part_dims
        )

    def encode(self, parts) -> list[EncoderOutput]:
        return [enc(x) for enc, x in zip(self.encoders, parts)]

    def decode(self, latents) -> list[torch.Tensor]:
        return [dec(z) for dec, z in zip(self.decoders, latents)]

    @torch.no_grad()
    def encode_mu(self, parts) -> list[torch.Tensor]:
        return [enc(x).mu for enc, x in zip(self.encoders, parts)]

    def pooled_motion_embeddings(self, mus) -> list[torch.Tensor]:
        return [pool(mu) for pool, mu in zip(self.pools, mus)]


class VqMotionVae(nn.Module):
    """Discrete baseline: same backbone, codebook lookup instead of sampling."""

    kind = "vq"

    def __init__(self, part_dims, settings: VaeSettings):
        super().__init__()
        self.part_dims = tuple(part_dims)
        self.settings = settings
        self.encoders = nn.ModuleList(
            TcnEncoder(dim, settings) for dim in part_dims
        )
        self.decoders = nn.ModuleList(
            TcnDecoder(dim, settings) for dim in part_dims
        )
        self.quantizers = nn.ModuleList(
            VectorQuantizer(
                settings.vq_codebook, settings.d_latent,
                commitment=settings.vq_commitment, ema_decay=settings.vq_ema_decay,
            )
            for _ in part_dims
        )

    def forward_part(self, i: int, x: torch.Tensor, update_ema: bool = False):
        latent = self.encoders[i](x).mu
        quantized, indices, losses = self.quantizers[i](latent)
        if update_ema and self.training:
            self.quantizers[i].ema_update(latent.detach(), indices)
        recon = self.decoders[i](quantized)
        return recon, losses


def split_part_tensors(frames: np.ndarray, partition: BodyPartition) -> list[torch.Tensor]:
    """(N, T, J, 6) corpus array -> three (N, T, J_part*6) float tensors."""
    out = []
    for idx in partition.parts:
        part = frames[:, :, list(idx), :]
        n, t = part.shape[:2]
        out.append(torch.from_numpy(part.reshape(n, t, -1).copy()).float())
    return out


def part_frames_to_clip_array(part_outputs, partition: BodyPartition) -> np.ndarray:
    """Three (N, T, J_part*6) tensors -> (N, T, J, 6) array in joint order."""
    n, t = part_outputs[0].shape[:2]
    frames = np.zeros((n, t, partition.n_joints, 6), dtype=np.float32)
    for out, idx in zip(part_outputs, partition.parts):
        arr = out.detach().cpu().numpy().reshape(n, t, len(idx), 6)
        for local, joint in enumerate(idx):
            frames[:, :, joint, :] = arr[:, :, local, :]
    return frames


@dataclass
class VaeTrainResult:
    model: nn.Module
    partition: BodyPartition
    fps: float
    curves: list[dict]


def reconstruction_geodesic(model, frames: np.ndarray, partition: BodyPartition,
                            batch_size: int = 64) -> float:
    """Eval-mode mean geodesic reconstruction error across parts and clips."""
    model.eval()
    parts = split_part_tensors(frames, partition)
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, frames.shape[0], batch_size):
            sl = slice(start, start + batch_size)
            batch_parts = [p[sl] for p in parts]
            part_losses = []
            for i, x in enumerate(batch_parts):
                if model.kind == "vq":
                    recon, _ = model.forward_part(i, x)
                else:
                    recon = model.decoders[i](model.encoders[i](x).mu)
                b, t = x.shape[:2]
                part_losses.append(
                    geodesic_loss(x.reshape(b, t, -1, 6), recon.reshape(b, t, -1, 6))
                )
            total += float(torch.stack(part_losses).mean()) * batch_parts[0].shape[0]
            count += batch_parts[0].shape[0]
    return total / count


def train_vae(corpus, cfg: ExperimentConfig, seed: int, aligner=None,
              partition: BodyPartition | None = None) -> VaeTrainResult:
    """Train the part-wise VAE (or the VQ baseline) on a triplet corpus.

    Deterministic for a given (corpus, config, seed). Returns the trained
    model plus per-epoch loss curves.
    """
    from .motion import default_partition

    if not corpus:
        raise ValueError("corpus is empty")
    settings = cfg.vae
    if settings.variant not in VARIANTS:
        raise ValueError(f"unknown VAE variant {settings.variant!r}")
    terms = _TERMS_BY_VARIANT[settings.variant]
    needs_aligner = bool(terms) and settings.lambda_c > 0
    if needs_aligner and aligner is None:
        raise ValueError(
            f"variant {settings.variant!r} needs a pretrained aligner for its "
            "contrastive targets"
        )

    fps = corpus[0].motion.fps
    n_joints = corpus[0].motion.n_joints
    partition = partition or default_partition(n_joints)
    partition.validate_for(n_joints)

    frames = np.stack([t.motion.frames for t in corpus])
    torch.manual_seed(seed)
    parts = split_part_tensors(frames, partition)
    part_dims = [p.shape[-1] for p in parts]

    if settings.variant == "vq":
        model = VqMotionVae(part_dims, settings)
    else:
        model = MotionVae(part_dims, settings, d_align=cfg.features.d_align)

    z_a = z_t = None
    if needs_aligner:
        from .features import aligned_pair

        pairs = [aligned_pair(t.audio, t.transcript, aligner) for t in corpus]
        z_a = torch.from_numpy(np.stack([p.z_a for p in pairs])).float()
        z_t = torch.from_numpy(np.stack([p.z_t for p in pairs])).float()

    optimizer = torch.optim.Adam(model.parameters(), lr=settings.lr)
    noise_gen = torch.Generator().manual_seed(seed + 1)
    order_rng = np.random.default_rng(seed + 2)

    n = frames.shape[0]
    curves: list[dict] = []
    last_good = copy.deepcopy(model.state_dict())
    model.train()
    for epoch in range(settings.epochs):
        perm = order_rng.permutation(n)
        sums = {"rec": 0.0, "vel": 0.0, "acc": 0.0, "kl": 0.0,
                "contrastive": 0.0, "total": 0.0}
        seen = 0
        for start in range(0, n, settings.batch_size):
            idx = torch.from_numpy(perm[start : start + settings.batch_size].copy())
            batch_parts = [p[idx] for p in parts]
            optimizer.zero_grad()
            loss = torch.zeros(())
            rec_sum = vel_sum = acc_sum = kl_sum = con_sum = 0.0
            for i, x in enumerate(batch_parts):
                b, t = x.shape[:2]
                x6 = x.reshape(b, t, -1, 6)
                if settings.variant == "vq":
                    recon, vq_losses = model.forward_part(i, x, update_ema=True)
                    r6 = recon.reshape(b, t, -1, 6)
                    rec = geodesic_loss(x6, r6)
                    vel = (torch.diff(x6, dim=1) - torch.diff(r6, dim=1)).abs().mean() * fps
                    acc = (torch.diff(x6, n=2, dim=1) - torch.diff(r6, n=2, dim=1)).abs().mean() * fps**2
                    part_loss = rec + vel + acc + settings.vq_commitment * vq_losses["commitment"]
                    kl = torch.zeros(())
                    con = torch.zeros(())
                else:
                    enc_out = model.encoders[i](x)
                    z = reparameterize(enc_out, generator=noise_gen, training=True)
                    recon = model.decoders[i](z)
                    r6 = recon.reshape(b, t, -1, 6)
                    rec = geodesic_loss(x6, r6)
                    vel = (torch.diff(x6, dim=1) - torch.diff(r6, dim=1)).abs().mean() * fps
                    acc = (torch.diff(x6, n=2, dim=1) - torch.diff(r6, n=2, dim=1)).abs().mean() * fps**2
                    kl = kl_loss(enc_out)
                    con = torch.zeros(())
                    if needs_aligner:
                        z_m = model.pools[i](enc_out.mu)
                        con = contrastive_loss(
                            z_m, z_a[idx], z_t[idx], tau=settings.tau, terms=terms
                        )
                    part_loss = (
                        rec + vel + acc
                        + settings.lambda_kl * kl
                        + settings.lambda_c * con
                    )
                loss = loss + part_loss
                rec_sum += float(rec)
                vel_sum += float(vel)
                acc_sum += float(acc)
                kl_sum += float(kl)
                con_sum += float(con)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"VAE training diverged at epoch {epoch}", last_good
                )
            loss.backward()
            optimizer.step()
            b = len(idx)
            seen += b
            sums["rec"] += rec_sum / 3 * b
            sums["vel"] += vel_sum / 3 * b
            sums["acc"] += acc_sum / 3 * b
            sums["kl"] += kl_sum / 3 * b
            sums["contrastive"] += con_sum * b
            sums["total"] += float(loss) * b
        last_good = copy.deepcopy(model.state_dict())
        curves.append(
            {"epoch": epoch, **{k: v / seen for k, v in sums.items()}}
        )
    model.eval()
    return VaeTrainResult(model=model, partition=partition, fps=fps, curves=curves)


def write_curves(curves, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in curves:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def save_vae(result: VaeTrainResult, path) -> None:
    model = result.model
    settings = model.settings
    tensors = {
        "meta.kind": np.array(1.0 if model.kind == "vq" else 0.0, dtype=np.float32),
        "meta.d_latent": np.array(settings.d_latent, dtype=np.float32),
        "meta.tcn_layers": np.array(settings.tcn_layers, dtype=np.float32),
        "meta.tcn_channels": np.array(settings.tcn_channels, dtype=np.float32),
        "meta.kernel_size": np.array(settings.kernel_size, dtype=np.float32),
        "meta.d_att": np.array(settings.d_att, dtype=np.float32),
        "meta.vq_codebook": np.array(settings.vq_codebook, dtype=np.float32),
        "meta.fps": np.array(result.fps, dtype=np.float32),
        "meta.part_upper": np.array(result.partition.upper, dtype=np.float32),
        "meta.part_hands": np.array(result.partition.hands, dtype=np.float32),
        "meta.part_lower": np.array(result.partition.lower, dtype=np.float32),
    }
    if model.kind == "continuous":
        tensors["meta.d_align"] = np.array(
            model.pools[0].proj.out_features, dtype=np.float32
        )
    for name, value in model.state_dict().items():
        tensors[name] = value.detach().numpy()
    containers.save_tensors(path, tensors)


def load_vae(path) -> VaeTrainResult:
    tensors = containers.load_tensors(path)
    partition = BodyPartition(
        upper=tuple(int(i) for i in tensors.pop("meta.part_upper")),
        hands=tuple(int(i) for i in tensors.pop("meta.part_hands")),
        lower=tuple(int(i) for i in tensors.pop("meta.part_lower")),
    )
    settings = VaeSettings(
        d_latent=int(tensors.pop("meta.d_latent")),
        tcn_layers=int(tensors.pop("meta.tcn_layers")),
        tcn_channels=int(tensors.pop("meta.tcn_channels")),
        kernel_size=int(tensors.pop("meta.kernel_size")),
        d_att=int(tensors.pop("meta.d_att")),
        vq_codebook=int(tensors.pop("meta.vq_codebook")),
    )
    kind = float(tensors.pop("meta.kind"))
    fps = float(tensors.pop("meta.fps"))
    part_dims = [6 * len(p) for p in partition.parts]
    if kind == 1.0:
        settings.variant = "vq"
        model = VqMotionVae(part_dims, settings)
        tensors.pop("meta.d_align", None)
    else:
        d_align = int(tensors.pop("meta.d_align"))
        model = MotionVae(part_dims, settings, d_align=d_align)
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    return VaeTrainResult(model=model, partition=partition, fps=fps, curves=[])
