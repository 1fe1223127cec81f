"""Stage 2: masked autoregressive generation over continuous motion latents.

Motion frames are encoded (by the frozen stage-1 encoders) into one
continuous token per frame (the three part latents stacked). A bidirectional
transformer reads known tokens, MASK embeddings, per-frame fused audio/text
conditioning, and the speaker embedding, and emits a conditioning vector per
masked position. A small residual MLP head models each token with per-token
diffusion: during training it predicts the noise injected by the forward
schedule; at sampling time it runs ancestral reverse diffusion from pure
noise, one token at a time, while masked positions are revealed over a
cosine unmasking schedule.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from . import containers
from .config import ExperimentConfig, FeatureSettings, HgatSettings, MmagSettings
from .features import MfccConfig, mfcc, text_embed
from .hgat import build_fusion
from .motion import MotionClip, Waveform
from .nets import EncoderBlock, sinusoidal_positions, timestep_embedding
from .vae import (
    TrainingDiverged,
    VaeTrainResult,
    part_frames_to_clip_array,
    split_part_tensors,
)


@dataclass(frozen=True)
class NoiseSchedule:
    """Forward-diffusion variance plan.

    beta has N entries for steps 1..N; alpha_bar has N+1 entries with
    alpha_bar[0] = 1 and alpha_bar strictly decreasing.
    """

    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if beta.ndim != 1 or alpha_bar.shape != (beta.shape[0] + 1,):
            raise ValueError("beta must be (N,), alpha_bar must be (N+1,)")
        if not ((beta > 0) & (beta < 1)).all():
            raise ValueError("beta values must lie in (0, 1)")
        if alpha_bar[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if not (np.diff(alpha_bar) < 0).all():
            raise ValueError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def n_steps(self) -> int:
        return self.beta.shape[0]


def build_schedule(n_diff: int, kind: str = "cosine") -> NoiseSchedule:
    """Linear (DDPM endpoints rescaled to n_diff) or squared-cosine schedule."""
    if n_diff < 1:
        raise ValueError("n_diff must be >= 1")
    if kind == "linear":
        scale = 1000.0 / n_diff
        beta = np.linspace(1e-4, 0.02, n_diff) * scale if n_diff > 1 else np.array([1e-4 * scale])
        beta = np.clip(beta, 1e-8, 0.999)
    elif kind == "cosine":
        s = 0.008
        t = np.arange(n_diff + 1) / n_diff
        f = np.cos((t + s) / (1.0 + s) * np.pi / 2.0) ** 2
        alpha_bar_raw = f / f[0]
        beta = np.clip(1.0 - alpha_bar_raw[1:] / alpha_bar_raw[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - beta)])
    return NoiseSchedule(beta=beta, alpha_bar=alpha_bar)


def forward_noise(e: torch.Tensor, t, eps: torch.Tensor,
                  schedule: NoiseSchedule) -> torch.Tensor:
    """sqrt(alpha_bar_t) * e + sqrt(1 - alpha_bar_t) * eps."""
    if eps.shape != e.shape:
        raise ValueError("noise must match token shape")
    alpha_bar = torch.from_numpy(schedule.alpha_bar).to(e.dtype)
    t_idx = torch.as_tensor(t, dtype=torch.long)
    if (t_idx < 0).any() or (t_idx > schedule.n_steps).any():
        raise ValueError(f"t out of range 0..{schedule.n_steps}")
    ab = alpha_bar[t_idx]
    while ab.dim() < e.dim():
        ab = ab.unsqueeze(-1)
    return torch.sqrt(ab) * e + torch.sqrt(1.0 - ab) * eps


class DenoiserMlp(nn.Module):
    """Per-token noise estimator: residual MLP blocks with SiLU activations,
    conditioned on (timestep embedding + conditioning vector) through
    adaptive layer modulation."""

    def __init__(self, d_tok: int, width: int, d_cond: int, n_blocks: int = 4):
        super().__init__()
        self.width = width
        self.in_proj = nn.Linear(d_tok, width)
        self.t_proj = nn.Linear(width, width)
        self.c_proj = nn.Linear(d_cond, width)
        self.norms = nn.ModuleList(
            nn.LayerNorm(width, elementwise_affine=False) for _ in range(n_blocks)
        )
        self.modulations = nn.ModuleList(
            nn.Linear(width, 3 * width) for _ in range(n_blocks)
        )
        self.fc1 = nn.ModuleList(nn.Linear(width, width) for _ in range(n_blocks))
        self.fc2 = nn.ModuleList(nn.Linear(width, width) for _ in range(n_blocks))
        self.out_norm = nn.LayerNorm(width, elementwise_affine=False)
        self.out_proj = nn.Linear(width, d_tok)
        # start every block and the output head at zero so the initial
        # prediction is exactly zero noise
        for mod in self.modulations:
            nn.init.zeros_(mod.weight)
            nn.init.zeros_(mod.bias)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)

    def forward(self, e_noisy: torch.Tensor, t, c: torch.Tensor) -> torch.Tensor:
        """(M, d_tok), timesteps, (M, d_cond) -> (M, d_tok) noise estimate."""
        t_idx = torch.as_tensor(t, dtype=torch.float32)
        if t_idx.dim() == 0:
            t_idx = t_idx.repeat(e_noisy.shape[0])
        cond = torch.nn.functional.silu(
            self.t_proj(timestep_embedding(t_idx, self.width)) + self.c_proj(c)
        )
        x = self.in_proj(e_noisy)
        for norm, mod, fc1, fc2 in zip(self.norms, self.modulations, self.fc1, self.fc2):
            shift, scale, gate = mod(cond).chunk(3, dim=-1)
            h = norm(x) * (1.0 + scale) + shift
            x = x + gate * fc2(torch.nn.functional.silu(fc1(h)))
        return self.out_proj(self.out_norm(x))


def diffusion_loss(e_tokens: torch.Tensor, c: torch.Tensor,
                   schedule: NoiseSchedule, generator: torch.Generator,
                   model: DenoiserMlp) -> torch.Tensor:
    """Noise-prediction MSE at uniformly drawn timesteps."""
    m = e_tokens.shape[0]
    t = torch.randint(1, schedule.n_steps + 1, (m,), generator=generator)
    eps = torch.randn(e_tokens.shape, generator=generator, dtype=e_tokens.dtype)
    noisy = forward_noise(e_tokens, t, eps, schedule)
    return ((eps - model(noisy, t, c)) ** 2).mean()


@torch.no_grad()
def sample_tokens(c: torch.Tensor, schedule: NoiseSchedule,
                  generator: torch.Generator, model: DenoiserMlp,
                  d_tok: int, clip_value: float = 5.0) -> torch.Tensor:
    """Ancestral reverse diffusion from pure noise, one token per row of c.

    The implied clean token is clipped to +/-clip_value each step (tokens are
    channel-normalized, so this is a loose bound on valid data) which keeps
    early-training samples from running away through the decoder.
    """
    m = c.shape[0]
    x = torch.randn((m, d_tok), generator=generator)
    beta = torch.from_numpy(schedule.beta).float()
    alpha_bar = torch.from_numpy(schedule.alpha_bar).float()
    for t in range(schedule.n_steps, 0, -1):
        eps_hat = model(x, torch.full((m,), float(t)), c)
        ab_t, ab_prev = alpha_bar[t], alpha_bar[t - 1]
        b_t = beta[t - 1]
        x0 = (x - torch.sqrt(1.0 - ab_t) * eps_hat) / torch.sqrt(ab_t)
        x0 = x0.clamp(-clip_value, clip_value)
        mean = (
            torch.sqrt(ab_prev) * b_t * x0
            + torch.sqrt(1.0 - b_t) * (1.0 - ab_prev) * x
        ) / (1.0 - ab_t)
        if t > 1:
            var = b_t * (1.0 - ab_prev) / (1.0 - ab_t)
            noise = torch.randn((m, d_tok), generator=generator)
            x = mean + torch.sqrt(var) * noise
        else:
            x = mean
    return x


def sample_token(c: torch.Tensor, schedule: NoiseSchedule,
                 generator: torch.Generator, model: DenoiserMlp,
                 d_tok: int) -> torch.Tensor:
    """Single-token convenience wrapper around :func:`sample_tokens`."""
    return sample_tokens(c.unsqueeze(0), schedule, generator, model, d_tok).squeeze(0)


class ArTransformer(nn.Module):
    """Bidirectional transformer over known tokens and MASK embeddings,
    with per-frame fused conditioning and speaker identity added in."""

    def __init__(self, d_tok: int, settings: MmagSettings, d_cond: int,
                 n_speakers: int):
        super().__init__()
        d_model = settings.d_model
        self.token_proj = nn.Linear(d_tok, d_model)
        self.mask_embedding = nn.Parameter(0.02 * torch.randn(d_model))
        self.cond_proj = nn.Linear(d_cond, d_model)
        self.speaker_proj = nn.Linear(n_speakers, d_model, bias=False)
        self.use_speaker = settings.speaker_in_transformer
        self.blocks = nn.ModuleList(
            EncoderBlock(d_model, settings.n_heads)
            for _ in range(settings.n_layers)
        )
        self.out_norm = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, d_model)
        self.d_model = d_model

    def forward(self, tokens: torch.Tensor, mask: torch.Tensor,
                cond_frames: torch.Tensor, speaker_onehot: torch.Tensor) -> torch.Tensor:
        """(B,T,d_tok), (B,T) bool, (B,T,d_cond), (B,S) -> (B,T,d_model)."""
        if not mask.any(dim=1).all():
            raise ValueError("every sequence needs at least one masked position")
        x = torch.where(
            mask.unsqueeze(-1), self.mask_embedding.to(tokens.dtype),
            self.token_proj(tokens),
        )
        x = x + self.cond_proj(cond_frames)
        if self.use_speaker:
            x = x + self.speaker_proj(speaker_onehot).unsqueeze(1)
        x = x + sinusoidal_positions(x.shape[1], self.d_model).to(x.dtype)
        for block in self.blocks:
            x = block(x)
        return self.head(self.out_norm(x))


def ar_forward(transformer: ArTransformer, tokens, mask, cond_frames,
               speaker_onehot) -> torch.Tensor:
    """Conditioning vectors at the masked positions, stacked row-wise."""
    c_all = transformer(tokens, mask, cond_frames, speaker_onehot)
    return c_all[mask]


def plan_unmask_counts(n_positions: int, n_steps: int) -> list[int]:
    """How many positions to reveal at each step of a cosine unmasking
    schedule. Every step reveals at least one position; counts sum to T.
    n_steps == T degenerates to one token per step, n_steps == 1 to all at
    once."""
    if n_steps < 1:
        raise ValueError("need at least one generation step")
    if n_steps > n_positions:
        raise ValueError(
            f"cannot take {n_steps} steps over {n_positions} positions"
        )
    counts = []
    masked = n_positions
    for k in range(1, n_steps + 1):
        remaining_steps = n_steps - k
        target_masked = math.floor(n_positions * math.cos(math.pi * k / (2 * n_steps)))
        reveal = max(masked - target_masked, 1)
        reveal = min(reveal, masked - remaining_steps)
        counts.append(reveal)
        masked -= reveal
    return counts


@dataclass
class MaskState:
    """Bookkeeping for masked generation; known positions are never re-masked."""

    mask: np.ndarray  # (T,) bool, True = unknown
    generation_order: np.ndarray  # permutation of [0, T)
    step_index: int = 0

    def reveal(self, count: int) -> np.ndarray:
        start = int((~self.mask).sum())
        positions = self.generation_order[start : start + count]
        if not self.mask[positions].all():
            raise RuntimeError("attempted to re-open a known position")
        self.mask[positions] = False
        self.step_index += 1
        return positions


class MmagModel(nn.Module):
    """Fusion + AR transformer + diffusion head, trained jointly in stage 2."""

    def __init__(self, d_tok: int, settings: MmagSettings,
                 features: FeatureSettings, hgat: HgatSettings,
                 n_speakers: int, fps: float):
        super().__init__()
        self.fusion = build_fusion(features, hgat, n_speakers, fps)
        self.transformer = ArTransformer(
            d_tok, settings, hgat.d_cond * settings.chunk, n_speakers
        )
        self.denoiser = DenoiserMlp(
            d_tok, settings.d_mlp, settings.d_model, settings.mlp_blocks
        )
        self.d_tok = d_tok


@dataclass
class MmagTrainResult:
    model: MmagModel
    schedule: NoiseSchedule
    token_mean: np.ndarray
    token_std: np.ndarray
    n_speakers: int
    text_seed: int
    chunk: int = 1
    curves: list[dict] = field(default_factory=list)


def clip_tokens(vae_result: VaeTrainResult, frames: np.ndarray,
                chunk: int = 1) -> np.ndarray:
    """(N, T, J, 6) motion -> (N, T/chunk, chunk*3*d_latent) tokens.

    Each token stacks the three part latents for ``chunk`` consecutive
    frames, so a token carries its own local dynamics, not just one pose.
    """
    parts = split_part_tensors(frames, vae_result.partition)
    with torch.no_grad():
        mus = vae_result.model.encode_mu(parts)
    per_frame = torch.cat(mus, dim=-1).numpy()
    n, t, d = per_frame.shape
    if t % chunk:
        raise ValueError(f"frame count {t} is not divisible by chunk {chunk}")
    return per_frame.reshape(n, t // chunk, chunk * d)


def _chunk_cond(cond_frames: torch.Tensor, chunk: int) -> torch.Tensor:
    """(B, T, d_cond) -> (B, T/chunk, chunk*d_cond): per-token conditioning
    keeps every frame's vector so within-chunk timing survives."""
    b, t, d = cond_frames.shape
    return cond_frames.reshape(b, t // chunk, chunk * d)


def _corpus_inputs(corpus, cfg: ExperimentConfig, n_speakers: int, text_seed: int):
    mfcc_cfg = cfg.mfcc_config()
    fps = corpus[0].motion.fps
    n_frames = corpus[0].motion.n_frames
    mfccs, texts, onehots = [], [], []
    samples = []
    for t in corpus:
        mfccs.append(mfcc(t.audio, mfcc_cfg).frames)
        texts.append(
            text_embed(t.transcript, n_frames, fps, cfg.features.d_text, text_seed).frames
        )
        onehot = np.zeros(n_speakers, dtype=np.float32)
        onehot[t.speaker_id] = 1.0
        onehots.append(onehot)
        samples.append(t.audio.samples)
    n_mfcc_frames = min(m.shape[0] for m in mfccs)
    mfccs = np.stack([m[:n_mfcc_frames] for m in mfccs])
    return (
        torch.from_numpy(mfccs).float(),
        torch.from_numpy(np.stack(samples)).float(),
        torch.from_numpy(np.stack(texts)).float(),
        torch.from_numpy(np.stack(onehots)).float(),
    )


def train_mmag(corpus, vae_result: VaeTrainResult, cfg: ExperimentConfig,
               seed: int) -> MmagTrainResult:
    """Train stage 2 on frozen stage-1 latents. Deterministic per seed."""
    if not corpus:
        raise ValueError("corpus is empty")
    settings = cfg.mmag
    n_speakers = max(t.speaker_id for t in corpus) + 1
    fps = corpus[0].motion.fps
    n_frames = corpus[0].motion.n_frames
    n_tok = n_frames // settings.chunk

    frames = np.stack([t.motion.frames for t in corpus])
    tokens_raw = clip_tokens(vae_result, frames, chunk=settings.chunk)
    token_mean = tokens_raw.mean(axis=(0, 1))
    token_std = tokens_raw.std(axis=(0, 1)) + 1e-6
    tokens = torch.from_numpy((tokens_raw - token_mean) / token_std).float()

    torch.manual_seed(seed)
    model = MmagModel(
        tokens.shape[-1], settings, cfg.features, cfg.hgat, n_speakers, fps
    )
    schedule = build_schedule(settings.n_diff, settings.schedule)
    mfcc_t, samples_t, text_t, onehot_t = _corpus_inputs(corpus, cfg, n_speakers, seed)

    optimizer = torch.optim.Adam(model.parameters(), lr=settings.lr)
    gen = torch.Generator().manual_seed(seed + 1)
    order_rng = np.random.default_rng(seed + 2)

    n = tokens.shape[0]
    curves: list[dict] = []
    last_good = copy.deepcopy(model.state_dict())
    model.train()
    for epoch in range(settings.epochs):
        perm = order_rng.permutation(n)
        epoch_loss, seen = 0.0, 0
        for start in range(0, n, settings.batch_size):
            idx = torch.from_numpy(perm[start : start + settings.batch_size].copy())
            b = idx.shape[0]
            tok = tokens[idx]
            ratios = settings.r_min + (1.0 - settings.r_min) * torch.rand(
                (b,), generator=gen
            )
            scores = torch.rand((b, n_tok), generator=gen)
            n_masked = torch.clamp((ratios * n_tok).round().long(), min=1)
            order = scores.argsort(dim=1)
            mask = torch.zeros((b, n_tok), dtype=torch.bool)
            for row in range(b):
                mask[row, order[row, : n_masked[row]]] = True

            optimizer.zero_grad()
            cond_frames = _chunk_cond(
                model.fusion(mfcc_t[idx], samples_t[idx], text_t[idx], onehot_t[idx]),
                settings.chunk,
            )
            c_masked = ar_forward(
                model.transformer, tok, mask, cond_frames, onehot_t[idx]
            )
            loss = diffusion_loss(tok[mask], c_masked, schedule, gen, model.denoiser)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"stage-2 training diverged at epoch {epoch}", last_good
                )
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss) * b
            seen += b
        last_good = copy.deepcopy(model.state_dict())
        curves.append({"epoch": epoch, "diffusion": epoch_loss / seen})
    model.eval()
    return MmagTrainResult(
        model=model, schedule=schedule, token_mean=token_mean,
        token_std=token_std, n_speakers=n_speakers, text_seed=seed,
        chunk=settings.chunk, curves=curves,
    )


@dataclass
class GestureGenerator:
    """Frozen two-stage pipeline: fused conditioning -> masked AR diffusion
    -> stage-1 decoding."""

    vae: VaeTrainResult
    mmag: MmagTrainResult
    cfg: ExperimentConfig

    def generate(self, audio: Waveform, transcript, speaker_id: int,
                 n_frames: int, n_steps: int, seed: int):
        """Generate one clip; returns (MotionClip, raw token array)."""
        model = self.mmag.model
        model.eval()
        schedule = self.mmag.schedule
        d_tok = model.d_tok
        if not 0 <= speaker_id < self.mmag.n_speakers:
            raise ValueError(
                f"speaker_id {speaker_id} out of range 0..{self.mmag.n_speakers - 1}"
            )

        mfcc_feats = mfcc(audio, self.cfg.mfcc_config()).frames
        text_frames = text_embed(
            transcript, n_frames, self.vae.fps, self.cfg.features.d_text,
            self.mmag.text_seed,
        ).frames
        onehot = np.zeros(self.mmag.n_speakers, dtype=np.float32)
        onehot[speaker_id] = 1.0

        chunk = self.mmag.chunk
        if n_frames % chunk:
            raise ValueError(
                f"frame count {n_frames} is not divisible by token chunk {chunk}"
            )
        n_tok = n_frames // chunk

        mfcc_t = torch.from_numpy(mfcc_feats).float().unsqueeze(0)
        samples_t = torch.from_numpy(audio.samples).float().unsqueeze(0)
        text_t = torch.from_numpy(text_frames).float().unsqueeze(0)
        onehot_t = torch.from_numpy(onehot).unsqueeze(0)

        gen = torch.Generator().manual_seed(seed)
        counts = plan_unmask_counts(n_tok, n_steps)
        state = MaskState(
            mask=np.ones(n_tok, dtype=bool),
            generation_order=torch.randperm(n_tok, generator=gen).numpy(),
        )
        tokens = torch.zeros((1, n_tok, d_tok))
        with torch.no_grad():
            cond_frames = _chunk_cond(
                model.fusion(mfcc_t, samples_t, text_t, onehot_t), chunk
            )
            for count in counts:
                mask_t = torch.from_numpy(state.mask).unsqueeze(0)
                c_all = model.transformer(tokens, mask_t, cond_frames, onehot_t)
                positions = state.reveal(count)
                c_sel = c_all[0, positions]
                sampled = sample_tokens(c_sel, schedule, gen, model.denoiser, d_tok)
                tokens[0, positions] = sampled
        if state.mask.any():
            raise RuntimeError("generation finished with masked positions left")

        raw = tokens.squeeze(0).numpy() * self.mmag.token_std + self.mmag.token_mean
        raw = raw.reshape(n_frames, d_tok // chunk)
        d_latent = raw.shape[1] // 3
        part_latents = [
            torch.from_numpy(raw[:, i * d_latent : (i + 1) * d_latent]).float().unsqueeze(0)
            for i in range(3)
        ]
        with torch.no_grad():
            part_frames = self.vae.model.decode(part_latents)
        frames = part_frames_to_clip_array(part_frames, self.vae.partition)[0]
        clip = MotionClip(frames=frames, fps=self.vae.fps)
        return clip, raw


def save_mmag(result: MmagTrainResult, cfg: ExperimentConfig, path) -> None:
    model = result.model
    settings = cfg.mmag
    tensors = {
        "meta.d_tok": np.array(model.d_tok, dtype=np.float32),
        "meta.chunk": np.array(result.chunk, dtype=np.float32),
        "meta.n_diff": np.array(settings.n_diff, dtype=np.float32),
        "meta.schedule_kind": np.array(
            0.0 if settings.schedule == "linear" else 1.0, dtype=np.float32
        ),
        "meta.d_model": np.array(settings.d_model, dtype=np.float32),
        "meta.n_layers": np.array(settings.n_layers, dtype=np.float32),
        "meta.n_heads": np.array(settings.n_heads, dtype=np.float32),
        "meta.d_mlp": np.array(settings.d_mlp, dtype=np.float32),
        "meta.mlp_blocks": np.array(settings.mlp_blocks, dtype=np.float32),
        "meta.speaker_in_transformer": np.array(
            float(settings.speaker_in_transformer), dtype=np.float32
        ),
        "meta.hgat_enabled": np.array(float(cfg.hgat.enabled), dtype=np.float32),
        "meta.n_speakers": np.array(result.n_speakers, dtype=np.float32),
        "meta.text_seed": np.array(result.text_seed, dtype=np.float32),
        "meta.token_mean": result.token_mean.astype(np.float32),
        "meta.token_std": result.token_std.astype(np.float32),
    }
    for name, value in model.state_dict().items():
        tensors[name] = value.detach().numpy()
    containers.save_tensors(path, tensors)


def load_mmag(path, cfg: ExperimentConfig, fps: float) -> MmagTrainResult:
    """Rebuild the stage-2 model; cfg must carry the same feature/hgat
    settings used at training time (the run config is persisted alongside
    checkpoints for exactly this purpose)."""
    tensors = containers.load_tensors(path)
    settings = MmagSettings(
        n_diff=int(tensors.pop("meta.n_diff")),
        schedule="linear" if float(tensors.pop("meta.schedule_kind")) == 0.0 else "cosine",
        chunk=int(tensors.pop("meta.chunk")),
        d_model=int(tensors.pop("meta.d_model")),
        n_layers=int(tensors.pop("meta.n_layers")),
        n_heads=int(tensors.pop("meta.n_heads")),
        d_mlp=int(tensors.pop("meta.d_mlp")),
        mlp_blocks=int(tensors.pop("meta.mlp_blocks")),
        speaker_in_transformer=bool(float(tensors.pop("meta.speaker_in_transformer"))),
    )
    hgat_cfg = copy.deepcopy(cfg.hgat)
    hgat_cfg.enabled = bool(float(tensors.pop("meta.hgat_enabled")))
    d_tok = int(tensors.pop("meta.d_tok"))
    n_speakers = int(tensors.pop("meta.n_speakers"))
    text_seed = int(tensors.pop("meta.text_seed"))
    token_mean = tensors.pop("meta.token_mean").astype(np.float64)
    token_std = tensors.pop("meta.token_std").astype(np.float64)
    model = MmagModel(d_tok, settings, cfg.features, hgat_cfg, n_speakers, fps)
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    return MmagTrainResult(
        model=model, schedule=build_schedule(settings.n_diff, settings.schedule),
        token_mean=token_mean, token_std=token_std, n_speakers=n_speakers,
        text_seed=text_seed, chunk=settings.chunk, curves=[],
    )
