"""Audio and text features: MFCC, hashed word embeddings, and a small
contrastive audio/text aligner whose frozen outputs serve as alignment
targets for the motion VAE.

The MFCC pipeline is implemented directly (Hann window, power STFT,
triangular mel bank, log, orthonormal DCT-II) so tests can pin down every
stage. Word embeddings are derived from a hash of (seed, word), which keeps
them deterministic across runs and processes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import torch
from scipy.signal.windows import hann
from torch import nn

from . import containers
from .motion import Waveform


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    n_fft: int = 512
    hop: int = 160
    n_mels: int = 26
    n_mfcc: int = 13
    f_min: float = 0.0
    f_max: float = 8000.0
    eps: float = 1e-10

    @property
    def hop_s(self) -> float:
        return self.hop / self.sample_rate

    def n_frames(self, n_samples: int) -> int:
        return 1 + (n_samples - self.n_fft) // self.hop


@dataclass(frozen=True)
class MfccFeatures:
    frames: np.ndarray  # (F, n_mfcc)
    hop_s: float
    config: MfccConfig


@dataclass(frozen=True)
class FrameAlignedText:
    frames: np.ndarray  # (T, d_text)
    vocab_dim: int


@dataclass(frozen=True)
class AlignedEmbeddings:
    z_a: np.ndarray  # (d_align,) unit norm
    z_t: np.ndarray  # (d_align,) unit norm


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MfccConfig) -> np.ndarray:
    """Triangular mel filters over rfft bins, shape (n_mels, n_fft//2 + 1)."""
    n_bins = config.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * config.sample_rate / config.n_fft
    mel_points = np.linspace(
        hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2
    )
    hz_points = mel_to_hz(mel_points)
    bank = np.zeros((config.n_mels, n_bins))
    for m in range(config.n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (bin_hz - left) / max(center - left, 1e-12)
        down = (right - bin_hz) / max(right - center, 1e-12)
        bank[m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def mel_filter_centers_hz(config: MfccConfig) -> np.ndarray:
    mel_points = np.linspace(
        hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2
    )
    return mel_to_hz(mel_points)[1:-1]


def log_mel_energies(waveform: Waveform, config: MfccConfig) -> np.ndarray:
    """Log mel energies per frame, shape (F, n_mels)."""
    if waveform.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform rate {waveform.sample_rate} != config rate {config.sample_rate}"
        )
    samples = waveform.samples.astype(np.float64)
    if samples.shape[0] < config.n_fft:
        raise ValueError(
            f"waveform has {samples.shape[0]} samples, need >= n_fft={config.n_fft}"
        )
    n_frames = config.n_frames(samples.shape[0])
    idx = np.arange(config.n_fft)[None, :] + config.hop * np.arange(n_frames)[:, None]
    windowed = samples[idx] * hann(config.n_fft, sym=False)[None, :]
    power = np.abs(np.fft.rfft(windowed, axis=1)) ** 2
    mel = power @ mel_filterbank(config).T
    return np.log(config.eps + mel)


def mfcc(waveform: Waveform, config: MfccConfig = MfccConfig()) -> MfccFeatures:
    """MFCCs via Hann window, power STFT, mel bank, log, orthonormal DCT-II."""
    log_mel = log_mel_energies(waveform, config)
    coeffs = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, : config.n_mfcc]
    return MfccFeatures(
        frames=coeffs.astype(np.float32), hop_s=config.hop_s, config=config
    )


def word_vector(word: str, d_text: int, seed: int) -> np.ndarray:
    """Deterministic unit vector for a word: hash -> RNG -> Gaussian -> normalize."""
    digest = hashlib.sha256(f"mag-text:{seed}:{word}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(d_text)
    return (v / np.linalg.norm(v)).astype(np.float32)


def text_embed(transcript, n_frames: int, fps: float, d_text: int, seed: int) -> FrameAlignedText:
    """One embedding per motion frame: the covering word's vector, else silence."""
    if d_text <= 0:
        raise ValueError("d_text must be positive")
    silence = word_vector("", d_text, seed)
    frames = np.tile(silence, (n_frames, 1))
    times = np.arange(n_frames) / fps
    for w in transcript:
        mask = (times >= w.start) & (times < w.end)
        if mask.any():
            frames[mask] = word_vector(w.word, d_text, seed)
    return FrameAlignedText(frames=frames, vocab_dim=d_text)


class AudioConvEncoder(nn.Module):
    """Strided 1-D conv encoder over raw waveform; the trainable high-level
    audio feature stand-in. The stride product equals the MFCC hop so both
    feature streams share a frame rate. The first layer's kernels span a few
    pitch periods so the stack can resolve speech-range frequencies."""

    def __init__(self, d_out: int = 32, channels=(24, 32), strides=(4, 5, 8),
                 kernels=(64, 16, 16)):
        super().__init__()
        if len(strides) != 3 or len(kernels) != 3 or len(channels) != 2:
            raise ValueError("expected 3 strides/kernels and 2 hidden channel counts")
        c1, c2 = channels
        self.stride_product = strides[0] * strides[1] * strides[2]
        self.conv1 = nn.Conv1d(1, c1, kernels[0], stride=strides[0])
        self.conv2 = nn.Conv1d(c1, c2, kernels[1], stride=strides[1])
        self.conv3 = nn.Conv1d(c2, d_out, kernels[2], stride=strides[2])
        self.d_out = d_out

    def forward(self, samples: torch.Tensor) -> torch.Tensor:
        """(B, n_samples) -> (B, F', d_out)."""
        x = samples.unsqueeze(1)
        x = torch.nn.functional.gelu(self.conv1(x))
        x = torch.nn.functional.gelu(self.conv2(x))
        x = self.conv3(x)
        return x.transpose(1, 2)


def highlevel_audio(waveform: Waveform, encoder: AudioConvEncoder) -> torch.Tensor:
    """High-level audio features (F', d_out) for one waveform."""
    samples = torch.from_numpy(np.asarray(waveform.samples, dtype=np.float32))
    with torch.no_grad():
        return encoder(samples.unsqueeze(0)).squeeze(0)


class ContrastiveAligner(nn.Module):
    """Paired audio/text embedder trained once on synthetic triplets, then
    frozen and used as the alignment target for the motion VAE."""

    def __init__(self, d_align: int = 64, d_hl: int = 32, d_text: int = 32,
                 text_seed: int = 0):
        super().__init__()
        self.audio_encoder = AudioConvEncoder(d_out=d_hl)
        self.pool_norm = nn.LayerNorm(d_hl)
        self.audio_proj = nn.Linear(d_hl, d_align)
        self.text_proj = nn.Linear(d_text, d_align)
        self.d_align = d_align
        self.d_hl = d_hl
        self.d_text = d_text
        self.text_seed = text_seed

    def encode_audio(self, samples: torch.Tensor) -> torch.Tensor:
        """(B, n_samples) -> (B, d_align) unit vectors."""
        feats = self.audio_encoder(samples)
        pooled = self.pool_norm(feats.mean(dim=1))
        z = self.audio_proj(pooled)
        return z / z.norm(dim=-1, keepdim=True).clamp_min(1e-12)

    def text_mean_vector(self, transcript) -> np.ndarray:
        if len(transcript) == 0:
            return word_vector("", self.d_text, self.text_seed)
        vecs = [word_vector(w.word, self.d_text, self.text_seed) for w in transcript]
        return np.mean(vecs, axis=0)

    def encode_text_mean(self, mean_vecs: torch.Tensor) -> torch.Tensor:
        """(B, d_text) word-vector means -> (B, d_align) unit vectors."""
        z = self.text_proj(mean_vecs)
        return z / z.norm(dim=-1, keepdim=True).clamp_min(1e-12)


def aligned_pair(waveform: Waveform, transcript, aligner: ContrastiveAligner) -> AlignedEmbeddings:
    """Frozen (z_a, z_t) pair for one triplet; both unit norm."""
    samples = torch.from_numpy(np.asarray(waveform.samples, dtype=np.float32))
    text_mean = torch.from_numpy(
        aligner.text_mean_vector(transcript).astype(np.float32)
    )
    with torch.no_grad():
        z_a = aligner.encode_audio(samples.unsqueeze(0)).squeeze(0)
        z_t = aligner.encode_text_mean(text_mean.unsqueeze(0)).squeeze(0)
    return AlignedEmbeddings(z_a=z_a.numpy(), z_t=z_t.numpy())


def _aligner_batches(aligner, triplets):
    lengths = {t.audio.samples.shape[0] for t in triplets}
    if len(lengths) != 1:
        raise ValueError("aligner training expects equal-length audio clips")
    audio = torch.from_numpy(np.stack([t.audio.samples for t in triplets]))
    text = torch.from_numpy(
        np.stack([aligner.text_mean_vector(t.transcript) for t in triplets])
    ).float()
    return audio, text


def _info_nce(z_a: torch.Tensor, z_t: torch.Tensor, tau: float) -> torch.Tensor:
    logits = z_a @ z_t.T / tau
    targets = torch.arange(z_a.shape[0])
    return 0.5 * (
        nn.functional.cross_entropy(logits, targets)
        + nn.functional.cross_entropy(logits.T, targets)
    )


def pretrain_aligner(corpus, epochs: int, seed: int, d_align: int = 64,
                     d_hl: int = 32, d_text: int = 32, batch_size: int = 32,
                     lr: float = 1e-3, tau: float = 0.1, held_out: int = 32):
    """Train the audio/text aligner with a symmetric InfoNCE objective.

    The last ``held_out`` triplets are excluded from training and used to
    report held-out loss at init and after training. Returns
    (aligner, history dict).
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    held_out = min(held_out, max(len(corpus) - 1, 0))
    train_set = corpus[: len(corpus) - held_out] if held_out else corpus
    eval_set = corpus[len(corpus) - held_out :] if held_out else corpus

    torch.manual_seed(seed)
    aligner = ContrastiveAligner(
        d_align=d_align, d_hl=d_hl, d_text=d_text, text_seed=seed
    )
    audio, text = _aligner_batches(aligner, train_set)
    eval_audio, eval_text = _aligner_batches(aligner, eval_set)

    def eval_loss():
        aligner.eval()
        with torch.no_grad():
            loss = _info_nce(
                aligner.encode_audio(eval_audio),
                aligner.encode_text_mean(eval_text),
                tau,
            )
        aligner.train()
        return float(loss)

    history = {"init_heldout_loss": eval_loss(), "epoch_loss": []}
    optimizer = torch.optim.Adam(aligner.parameters(), lr=lr)
    order_rng = np.random.default_rng(seed)
    n = audio.shape[0]
    for _ in range(epochs):
        perm = order_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = torch.from_numpy(perm[start : start + batch_size].copy())
            if idx.shape[0] < 2:
                continue
            optimizer.zero_grad()
            loss = _info_nce(
                aligner.encode_audio(audio[idx]),
                aligner.encode_text_mean(text[idx]),
                tau,
            )
            if not torch.isfinite(loss):
                raise RuntimeError(
                    "aligner training diverged: non-finite InfoNCE loss"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss) * idx.shape[0]
        history["epoch_loss"].append(epoch_loss / n)
    history["final_heldout_loss"] = eval_loss()
    aligner.eval()
    return aligner, history


def retrieval_at_1(aligner: ContrastiveAligner, triplets) -> float:
    """Audio->text top-1 retrieval accuracy over matched pairs."""
    audio, text = _aligner_batches(aligner, triplets)
    with torch.no_grad():
        z_a = aligner.encode_audio(audio)
        z_t = aligner.encode_text_mean(text)
    hits = (z_a @ z_t.T).argmax(dim=1) == torch.arange(z_a.shape[0])
    return float(hits.float().mean())


def save_aligner(aligner: ContrastiveAligner, path) -> None:
    tensors = {
        "meta.d_align": np.array(aligner.d_align, dtype=np.float32),
        "meta.d_hl": np.array(aligner.d_hl, dtype=np.float32),
        "meta.d_text": np.array(aligner.d_text, dtype=np.float32),
        "meta.text_seed": np.array(aligner.text_seed, dtype=np.float32),
    }
    for name, value in aligner.state_dict().items():
        tensors[name] = value.detach().numpy()
    containers.save_tensors(path, tensors)


def load_aligner(path) -> ContrastiveAligner:
    tensors = containers.load_tensors(path)
    aligner = ContrastiveAligner(
        d_align=int(tensors.pop("meta.d_align")),
        d_hl=int(tensors.pop("meta.d_hl")),
        d_text=int(tensors.pop("meta.d_text")),
        text_seed=int(tensors.pop("meta.text_seed")),
    )
    aligner.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    aligner.eval()
    return aligner
