"""Evaluation metrics: Frechet gesture distance, beat consistency, diversity.

The Frechet metric's feature extractor is the frozen stage-1 encoder
(time-mean of mu, three parts concatenated), so scores are self-contained
but only comparable between runs of this pipeline, not across papers.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .features import MfccConfig, log_mel_energies
from .motion import MotionClip, Waveform, geodesic_angles
from .vae import VaeTrainResult, split_part_tensors


@dataclass
class MetricReport:
    fgd: float
    bc: float
    diversity: float
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("fgd", "bc", "diversity"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")
        if self.bc > 1.0 + 1e-12:
            raise ValueError(f"beat consistency {self.bc} exceeds 1")
        if self.diversity < 0:
            raise ValueError("diversity must be non-negative")

    def to_json(self) -> str:
        payload = {
            "fgd": self.fgd, "bc": self.bc, "diversity": self.diversity,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def clip_features(clips, vae_result: VaeTrainResult) -> np.ndarray:
    """Per-clip features for the Frechet metric: frozen encoder mu, averaged
    over time, three parts concatenated. Shape (n_clips, 3*d_latent)."""
    frames = np.stack([c.frames for c in clips])
    parts = split_part_tensors(frames, vae_result.partition)
    with torch.no_grad():
        mus = vae_result.model.encode_mu(parts)
    pooled = [mu.mean(dim=1) for mu in mus]
    return torch.cat(pooled, dim=-1).double().numpy()


def _sym_sqrt(matrix: np.ndarray, neg_tol: float) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.min() < -neg_tol:
        raise ValueError(
            f"matrix square root failed: eigenvalue {eigvals.min():.3e} below "
            f"-{neg_tol:.0e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_gaussian(mu_r: np.ndarray, cov_r: np.ndarray, mu_g: np.ndarray,
                     cov_g: np.ndarray, neg_tol: float = 1e-6) -> float:
    """Frechet distance between two Gaussians.

    ||mu_r - mu_g||^2 + Tr(cov_r + cov_g - 2 (cov_r cov_g)^{1/2}), with the
    matrix square root taken by eigendecomposition of the symmetrized
    product sqrt(cov_r) cov_g sqrt(cov_r); eigenvalues in [-neg_tol, 0) are
    clipped to zero.
    """
    mu_r = np.atleast_1d(np.asarray(mu_r, dtype=np.float64))
    mu_g = np.atleast_1d(np.asarray(mu_g, dtype=np.float64))
    cov_r = np.atleast_2d(np.asarray(cov_r, dtype=np.float64))
    cov_g = np.atleast_2d(np.asarray(cov_g, dtype=np.float64))
    diff = mu_r - mu_g
    sqrt_r = _sym_sqrt((cov_r + cov_r.T) / 2.0, neg_tol)
    inner = sqrt_r @ cov_g @ sqrt_r
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    if eigvals.min() < -neg_tol:
        raise ValueError(
            f"matrix square root failed: eigenvalue {eigvals.min():.3e} below "
            f"-{neg_tol:.0e}"
        )
    trace_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()
    return float(diff @ diff + np.trace(cov_r) + np.trace(cov_g) - 2.0 * trace_sqrt)


def _moments(features: np.ndarray, shrinkage: float) -> tuple[np.ndarray, np.ndarray]:
    mu = features.mean(axis=0)
    cov = np.cov(features, rowvar=False)
    cov = np.atleast_2d(cov)
    if features.shape[0] < features.shape[1] + 1:
        cov = cov + shrinkage * np.eye(cov.shape[0])
    return mu, cov


def fgd(real_clips, gen_clips, vae_result: VaeTrainResult,
        shrinkage: float = 1e-6) -> float:
    """Frechet gesture distance between two clip sets."""
    if len(real_clips) < 2 or len(gen_clips) < 2:
        raise ValueError("need at least two clips per set")
    feats_r = clip_features(real_clips, vae_result)
    feats_g = clip_features(gen_clips, vae_result)
    mu_r, cov_r = _moments(feats_r, shrinkage)
    mu_g, cov_g = _moments(feats_g, shrinkage)
    return frechet_gaussian(mu_r, cov_r, mu_g, cov_g)


def audio_beats(waveform: Waveform, config: MfccConfig | None = None,
                min_separation: float = 0.1) -> np.ndarray:
    """Beat times from spectral flux: half-wave-rectified mel log-energy
    differences summed over bands, picked at local maxima above mean + 1 std
    with a minimum separation. The threshold is relative, so amplitude
    scaling does not move beats. Returns times in seconds (possibly empty).
    """
    if waveform.samples.shape[0] == 0:
        raise ValueError("waveform is empty")
    config = config or MfccConfig(sample_rate=waveform.sample_rate)
    if waveform.samples.shape[0] < config.n_fft:
        return np.zeros(0)
    log_mel = log_mel_energies(waveform, config)
    flux = np.clip(np.diff(log_mel, axis=0), 0.0, None).sum(axis=1)
    if flux.shape[0] < 3:
        return np.zeros(0)
    threshold = flux.mean() + flux.std()
    is_peak = (flux[1:-1] > flux[:-2]) & (flux[1:-1] > flux[2:]) & (flux[1:-1] > threshold)
    candidates = np.flatnonzero(is_peak) + 1
    if candidates.size == 0:
        return np.zeros(0)
    # strongest-first selection with the separation constraint
    order = candidates[np.argsort(-flux[candidates], kind="stable")]
    kept: list[int] = []
    min_gap = min_separation * config.sample_rate / config.hop
    for idx in order:
        if all(abs(idx - k) >= min_gap for k in kept):
            kept.append(int(idx))
    kept.sort()
    # flux[i] compares windows i and i+1; report the center of window i+1
    times = (np.array(kept) + 1) * config.hop_s + config.n_fft / (2 * config.sample_rate)
    return times


def motion_beats(clip: MotionClip) -> np.ndarray:
    """Kinematic beat times: local minima of the mean angular speed that dip
    below its mean (motion pauses). Beat time is frame/fps of the transition
    index. Returns times in seconds (possibly empty)."""
    if clip.n_frames < 3:
        raise ValueError("need at least 3 frames")
    angles = geodesic_angles(clip.frames[:-1], clip.frames[1:])  # (T-1, J)
    envelope = angles.mean(axis=1) * clip.fps
    below = envelope < envelope.mean()
    interior = (
        (envelope[1:-1] < envelope[:-2])
        & (envelope[1:-1] < envelope[2:])
        & below[1:-1]
    )
    indices = np.flatnonzero(interior) + 1
    return indices / clip.fps


def beat_consistency(audio_beat_times, motion_beat_times, sigma: float = 0.1) -> float:
    """Mean Gaussian-kernel proximity of each audio beat to the nearest
    motion beat. 1.0 when lists coincide; 0.0 (with a warning) when there
    are no motion beats."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    audio_beat_times = np.asarray(audio_beat_times, dtype=np.float64)
    motion_beat_times = np.asarray(motion_beat_times, dtype=np.float64)
    if audio_beat_times.size == 0:
        raise ValueError("audio beat list is empty")
    if motion_beat_times.size == 0:
        warnings.warn("no motion beats; beat consistency is 0", RuntimeWarning,
                      stacklevel=2)
        return 0.0
    d2 = (audio_beat_times[:, None] - motion_beat_times[None, :]) ** 2
    return float(np.exp(-d2.min(axis=1) / (2.0 * sigma**2)).mean())


def diversity(clips) -> float:
    """Mean absolute feature difference over all unordered clip pairs."""
    if len(clips) < 2:
        raise ValueError("need at least two clips")
    arrays = [np.asarray(c.frames, dtype=np.float64) for c in clips]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError("clips must share one shape")
    total, pairs = 0.0, 0
    for i in range(len(arrays)):
        for j in range(i + 1, len(arrays)):
            total += np.abs(arrays[i] - arrays[j]).mean()
            pairs += 1
    return total / pairs


def evaluate(real_clips, gen_clips, vae_result: VaeTrainResult,
             audio_list=None, bc_sigma: float = 0.1,
             shrinkage: float = 1e-6, config: dict | None = None) -> MetricReport:
    """Full metric report. BC is computed against ``audio_list`` (one
    waveform per generated clip) when provided, else reported as 0."""
    fgd_value = fgd(real_clips, gen_clips, vae_result, shrinkage=shrinkage)
    div_value = diversity(gen_clips)
    bc_value = 0.0
    if audio_list:
        scores = []
        for clip, audio in zip(gen_clips, audio_list):
            beats_a = audio_beats(audio)
            if beats_a.size == 0:
                continue
            scores.append(beat_consistency(beats_a, motion_beats(clip), sigma=bc_sigma))
        bc_value = float(np.mean(scores)) if scores else 0.0
    return MetricReport(
        fgd=fgd_value, bc=bc_value, diversity=div_value, config=config or {}
    )
