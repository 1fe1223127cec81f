"""Hybrid-granularity audio/text fusion.

Low-level (MFCC) and high-level (conv encoder) audio features are fused
frame-by-frame with windowed local attention, pooled down to the motion
frame rate, and merged with frame-aligned text plus a speaker embedding
through a small self-attention encoder. The output is one conditioning
vector per motion frame.

A plain per-frame MLP fusion with the same inputs and output shape is kept
as the ablation baseline.
"""

from __future__ import annotations

import warnings

import numpy as np
import torch
from torch import nn

from .config import FeatureSettings, HgatSettings
from .features import AudioConvEncoder
from .nets import EncoderBlock, sinusoidal_positions


def rescale_matrix(n_in: int, n_out: int, from_rate: float, to_rate: float) -> np.ndarray:
    """(n_out, n_in) matrix implementing rate conversion by mean-pooling
    (downscale) or nearest-frame repetition (upscale).

    Each output frame i covers input frames [floor(i*from/to),
    floor((i+1)*from/to)); upscaling inverts those windows, so
    downscale(upscale(x)) == x. Windows that run past the input are clamped;
    fully empty windows repeat the last input frame.
    """
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("rates must be positive")
    matrix = np.zeros((n_out, n_in), dtype=np.float32)
    if to_rate <= from_rate:
        bounds = np.floor(np.arange(n_out + 1) * from_rate / to_rate).astype(int)
        clamped = False
        for i in range(n_out):
            lo, hi = bounds[i], bounds[i + 1]
            if hi > n_in:
                hi = n_in
                clamped = True
            if lo >= n_in:
                matrix[i, n_in - 1] = 1.0
                clamped = True
                continue
            hi = max(hi, lo + 1)
            matrix[i, lo:hi] = 1.0 / (hi - lo)
        if clamped and bounds[-1] - n_in > from_rate / to_rate:
            warnings.warn(
                f"rescale: input length {n_in} is short of the expected "
                f"{bounds[-1]} frames; tail cropped",
                RuntimeWarning,
                stacklevel=2,
            )
    else:
        bounds = np.floor(np.arange(n_in + 1) * to_rate / from_rate).astype(int)
        for j in range(n_out):
            src = int(np.searchsorted(bounds, j, side="right")) - 1
            matrix[j, min(max(src, 0), n_in - 1)] = 1.0
    return matrix


def rescale(stream: np.ndarray, from_rate: float, to_rate: float,
            n_out: int | None = None) -> np.ndarray:
    """Resample a (F, d) feature stream to a new frame rate."""
    stream = np.asarray(stream)
    if n_out is None:
        n_out = int(round(stream.shape[0] * to_rate / from_rate))
    return rescale_matrix(stream.shape[0], n_out, from_rate, to_rate) @ stream


class LocalAttentionFuse(nn.Module):
    """Fuse two equal-rate feature streams with attention restricted to a
    +/-window frame neighborhood."""

    def __init__(self, d_low: int, d_high: int, d_out: int, window: int):
        super().__init__()
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        d_in = d_low + d_high
        self.q = nn.Linear(d_in, d_out)
        self.k = nn.Linear(d_in, d_out)
        self.v = nn.Linear(d_in, d_out)
        self.out = nn.Linear(d_out, d_out)
        self.d_out = d_out

    def forward(self, low: torch.Tensor, high: torch.Tensor,
                return_weights: bool = False):
        """(B, F, d_low) and (B, F, d_high) -> (B, F, d_out)."""
        if low.shape[:-1] != high.shape[:-1]:
            raise ValueError("streams must share batch and frame dims")
        x = torch.cat([low, high], dim=-1)
        q, k, v = self.q(x), self.k(x), self.v(x)
        scores = q @ k.transpose(-1, -2) / self.d_out**0.5
        n = x.shape[-2]
        idx = torch.arange(n)
        banned = (idx[:, None] - idx[None, :]).abs() > self.window
        scores = scores.masked_fill(banned, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        fused = self.out(weights @ v)
        if return_weights:
            return fused, weights
        return fused


class SelfAttentionMerge(nn.Module):
    """Concatenate per-frame audio and text, add speaker embedding and
    positions, then run a 2-layer self-attention encoder."""

    def __init__(self, d_audio: int, d_text: int, d_cond: int, n_heads: int,
                 n_speakers: int, n_layers: int = 2, use_speaker: bool = True):
        super().__init__()
        self.in_proj = nn.Linear(d_audio + d_text, d_cond)
        self.speaker_proj = nn.Linear(n_speakers, d_cond, bias=False)
        self.use_speaker = use_speaker
        self.blocks = nn.ModuleList(
            EncoderBlock(d_cond, n_heads) for _ in range(n_layers)
        )
        self.d_cond = d_cond

    def embed(self, audio_frames, text_frames, speaker_onehot) -> torch.Tensor:
        if audio_frames.shape[-2] != text_frames.shape[-2]:
            raise ValueError(
                f"audio ({audio_frames.shape[-2]}) and text "
                f"({text_frames.shape[-2]}) frame counts differ"
            )
        x = self.in_proj(torch.cat([audio_frames, text_frames], dim=-1))
        if self.use_speaker:
            x = x + self.speaker_proj(speaker_onehot).unsqueeze(-2)
        return x + sinusoidal_positions(x.shape[-2], self.d_cond).to(x.dtype)

    def forward(self, audio_frames, text_frames, speaker_onehot) -> torch.Tensor:
        """(B, T, d_audio), (B, T, d_text), (B, n_speakers) -> (B, T, d_cond)."""
        x = self.embed(audio_frames, text_frames, speaker_onehot)
        for block in self.blocks:
            x = block(x)
        return x


class HybridFusion(nn.Module):
    """Full fusion stack: conv audio encoder + local attention + rescale to
    motion rate + self-attention merge with text and speaker identity."""

    kind = "hgat"

    def __init__(self, features: FeatureSettings, hgat: HgatSettings,
                 n_speakers: int, fps: float):
        super().__init__()
        self.audio_encoder = AudioConvEncoder(d_out=features.d_hl)
        if self.audio_encoder.stride_product != features.hop:
            raise ValueError(
                "conv encoder stride product must equal the MFCC hop "
                f"({self.audio_encoder.stride_product} != {features.hop})"
            )
        self.local_fuse = LocalAttentionFuse(
            features.n_mfcc, features.d_hl, hgat.d_a, hgat.window
        )
        self.merge = SelfAttentionMerge(
            hgat.d_a, features.d_text, hgat.d_cond, hgat.n_heads,
            n_speakers, use_speaker=hgat.speaker_in_fusion,
        )
        self.feature_rate = features.sample_rate / features.hop
        self.fps = fps
        self._pool_cache: dict[tuple[int, int], torch.Tensor] = {}

    def _pool(self, n_in: int, n_out: int) -> torch.Tensor:
        key = (n_in, n_out)
        if key not in self._pool_cache:
            self._pool_cache[key] = torch.from_numpy(
                rescale_matrix(n_in, n_out, self.feature_rate, self.fps)
            )
        return self._pool_cache[key]

    def forward(self, mfcc_frames, samples, text_frames, speaker_onehot) -> torch.Tensor:
        """(B,F,n_mfcc), (B,n_samples), (B,T,d_text), (B,S) -> (B,T,d_cond)."""
        high = self.audio_encoder(samples)
        n = min(mfcc_frames.shape[1], high.shape[1])
        fused = self.local_fuse(mfcc_frames[:, :n], high[:, :n])
        audio_frames = self._pool(n, text_frames.shape[1]).to(fused.dtype) @ fused
        return self.merge(audio_frames, text_frames, speaker_onehot)


class MlpFusion(nn.Module):
    """Ablation baseline: rescale both audio streams to the motion rate,
    concatenate with text per frame, and fuse with a plain MLP."""

    kind = "mlp"

    def __init__(self, features: FeatureSettings, hgat: HgatSettings,
                 n_speakers: int, fps: float):
        super().__init__()
        self.audio_encoder = AudioConvEncoder(d_out=features.d_hl)
        d_in = features.n_mfcc + features.d_hl + features.d_text
        self.mlp = nn.Sequential(
            nn.Linear(d_in, hgat.d_cond),
            nn.GELU(),
            nn.Linear(hgat.d_cond, hgat.d_cond),
        )
        self.speaker_proj = nn.Linear(n_speakers, hgat.d_cond, bias=False)
        self.use_speaker = hgat.speaker_in_fusion
        self.feature_rate = features.sample_rate / features.hop
        self.fps = fps
        self._pool_cache: dict[tuple[int, int], torch.Tensor] = {}

    def _pool(self, n_in: int, n_out: int) -> torch.Tensor:
        key = (n_in, n_out)
        if key not in self._pool_cache:
            self._pool_cache[key] = torch.from_numpy(
                rescale_matrix(n_in, n_out, self.feature_rate, self.fps)
            )
        return self._pool_cache[key]

    def forward(self, mfcc_frames, samples, text_frames, speaker_onehot) -> torch.Tensor:
        high = self.audio_encoder(samples)
        n = min(mfcc_frames.shape[1], high.shape[1])
        pool = self._pool(n, text_frames.shape[1])
        low = pool @ mfcc_frames[:, :n]
        hi = pool @ high[:, :n]
        x = self.mlp(torch.cat([low, hi, text_frames], dim=-1))
        if self.use_speaker:
            x = x + self.speaker_proj(speaker_onehot).unsqueeze(-2)
        return x


def build_fusion(features: FeatureSettings, hgat: HgatSettings, n_speakers: int,
                 fps: float) -> nn.Module:
    if hgat.enabled:
        return HybridFusion(features, hgat, n_speakers, fps)
    return MlpFusion(features, hgat, n_speakers, fps)


def local_attention_fuse(low, high, module: LocalAttentionFuse,
                         return_weights: bool = False):
    """Functional wrapper over :class:`LocalAttentionFuse` for 2-D inputs."""
    out = module(low.unsqueeze(0), high.unsqueeze(0), return_weights=return_weights)
    if return_weights:
        fused, weights = out
        return fused.squeeze(0), weights.squeeze(0)
    return out.squeeze(0)


def merge_self_attention(audio_frames, text_frames, speaker_onehot,
                         module: SelfAttentionMerge) -> torch.Tensor:
    """Functional wrapper over :class:`SelfAttentionMerge` for 2-D inputs."""
    return module(
        audio_frames.unsqueeze(0), text_frames.unsqueeze(0),
        speaker_onehot.unsqueeze(0),
    ).squeeze(0)
