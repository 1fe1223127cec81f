"""Synthetic beat-correlated corpus: a desk-scale stand-in for mocap data.

Each generated triplet couples its three modalities so that alignment and
synchronization are learnable with recoverable ground truth:

* audio is a pitched tone whose amplitude envelope carries periodic beat
  bursts; the tone's pitch follows the transcript (each vocabulary word has
  its own pitch, shifted per speaker), which is what gives audio and text
  mutual information for contrastive pretraining;
* motion performs a stroke into each beat and pauses exactly on it, so a
  kinematic beat detector recovers the embedded beat times;
* the designated semantic word co-occurs with an arm-raise motif on a fixed
  set of joints;
* each speaker adds a constant style offset (STYLE_DELTA per speaker step)
  to the raw 6D rotation features.

Generation is a pure function of its arguments: every clip draws from an RNG
seeded by hash(seed, clip_index), so corpora are replayable and clips can be
generated independently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .motion import (
    MotionClip,
    TranscriptWord,
    Triplet,
    Waveform,
    axis_angle_matrix,
    load_clip,
    load_transcript,
    rotation_to_6d,
    save_clip,
    save_transcript,
)

SAMPLE_RATE = 16000

VOCAB = (
    "raise", "well", "become", "feel", "this", "that", "here", "there",
    "always", "never", "maybe", "really", "think", "know", "want", "need",
    "good", "bad", "big", "small", "left", "right", "open", "close",
    "fast", "slow", "first", "last", "again", "today", "people", "world",
)
SEMANTIC_WORD = VOCAB[0]
SEMANTIC_PROB = 0.35  # chance a clip contains the semantic word

# Mean offset added to every 6D feature channel per unit of speaker id
# (centered across speakers); adjacent speakers differ by exactly this much
# in expectation.
STYLE_DELTA = 0.2

BEAT_PERIOD_S = 0.5
WORD_SLOT_S = 0.35
WORD_GAP_S = 0.05

_BASE_PITCH_HZ = 180.0
_PITCH_STEP_HZ = 12.0
_SPEAKER_PITCH_HZ = 20.0
_REST_PITCH_HZ = 150.0

# joints that perform the arm-raise motif when the semantic word occurs
_MOTIF_AXIS = np.array([1.0, 0.0, 0.0])
_MOTIF_ANGLE = 1.2


@dataclass(frozen=True)
class ClipTruth:
    """Ground truth embedded in one synthetic clip, for oracle tests."""

    beat_times: tuple[float, ...]
    semantic_interval: tuple[float, float] | None
    speaker_id: int


def word_pitch_hz(word: str, speaker_id: int) -> float:
    speaker_shift = _SPEAKER_PITCH_HZ * speaker_id
    if word not in VOCAB:
        return _REST_PITCH_HZ + speaker_shift
    return _BASE_PITCH_HZ + _PITCH_STEP_HZ * VOCAB.index(word) + speaker_shift


def _clip_rng(seed: int, index: int) -> np.random.Generator:
    digest = hashlib.sha256(f"mag-synth:{seed}:{index}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def quantize_pcm(samples: np.ndarray) -> np.ndarray:
    """Snap float samples onto the 16-bit PCM grid (what a WAV round-trip keeps)."""
    ints = np.round(np.clip(samples, -1.0, 1.0) * 32767.0)
    return (ints / 32767.0).astype(np.float32)


def _burst_shape(attack_s: float, decay_s: float, sample_rate: int) -> np.ndarray:
    attack = int(attack_s * sample_rate)
    decay = int(decay_s * sample_rate)
    return np.concatenate(
        [
            np.linspace(0.0, 1.0, attack, endpoint=False),
            np.cos(0.5 * np.pi * np.arange(decay) / decay) ** 2,
        ]
    )


def _add_bursts(env: np.ndarray, beat_times, shape: np.ndarray, gain: float,
                sample_rate: int) -> None:
    for t_b in beat_times:
        start = int(round(t_b * sample_rate))
        stop = min(start + shape.shape[0], env.shape[0])
        if start < env.shape[0]:
            env[start:stop] += gain * shape[: stop - start]


def _synth_audio(rng, duration_s, transcript, speaker_id, beat_times) -> Waveform:
    n = int(round(duration_s * SAMPLE_RATE))
    freq = np.full(n, _REST_PITCH_HZ + _SPEAKER_PITCH_HZ * speaker_id)
    for w in transcript:
        a = int(round(w.start * SAMPLE_RATE))
        b = min(int(round(w.end * SAMPLE_RATE)), n)
        freq[a:b] = word_pitch_hz(w.word, speaker_id)
    # glide between word pitches; a hard frequency step splatters energy
    # across the spectrum and would read as a spurious onset
    glide = np.exp(-0.5 * (np.arange(-480, 481) / 160.0) ** 2)
    glide /= glide.sum()
    freq = np.convolve(np.pad(freq, 480, mode="edge"), glide, mode="same")[480:-480]
    phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE

    # tone amplitude bursts at beats, plus a broadband click so every mel
    # band jumps at a beat (word pitch changes only move one band)
    tone_env = np.full(n, 0.20)
    _add_bursts(tone_env, beat_times, _burst_shape(0.008, 0.070, SAMPLE_RATE),
                0.45, SAMPLE_RATE)
    click_env = np.zeros(n)
    _add_bursts(click_env, beat_times, _burst_shape(0.004, 0.040, SAMPLE_RATE),
                0.30, SAMPLE_RATE)
    samples = tone_env * np.sin(phase) + click_env * rng.standard_normal(n)
    return Waveform(samples=quantize_pcm(samples), sample_rate=SAMPLE_RATE)


def _smooth_noise(rng: np.random.Generator, n: int, sigma_frames: float) -> np.ndarray:
    raw = rng.standard_normal(n + 12)
    k = np.exp(-0.5 * (np.arange(-6, 7) / sigma_frames) ** 2)
    k /= k.sum()
    return np.convolve(raw, k, mode="same")[6:-6]


def _motif_joints(n_joints: int) -> tuple[int, ...]:
    if n_joints >= 9:
        return (3, 4, 7)  # shoulder/elbow/hand chain of the default skeleton
    return tuple(range(min(2, n_joints)))


def _synth_motion(rng, n_frames, n_joints, fps, beat_times, semantic_interval,
                  speaker_id, n_speakers) -> MotionClip:
    frames_t = np.arange(n_frames) / fps
    beat_frames = np.asarray(beat_times) * fps

    # angular-speed profile shared by all joints: slow wander, a stroke into
    # each beat, then a hard pause exactly on the beat. Speeds are evaluated
    # at frame-transition midpoints so a beat between two frames still gates
    # the transition that straddles it.
    mid = np.arange(n_frames - 1, dtype=np.float64) + 0.5
    pause_gate = np.ones(n_frames - 1)
    for f_b in beat_frames:
        pause_gate *= 1.0 - 0.99 * np.exp(-0.5 * ((mid - f_b) / 1.0) ** 2)
    speed = 0.9 + 0.15 * _smooth_noise(rng, n_frames - 1, sigma_frames=4.0)
    speed = np.clip(speed, 0.4, None)
    for f_b in beat_frames:
        speed += 2.5 * np.exp(-0.5 * ((mid - (f_b - 1.8)) / 0.8) ** 2)
    speed *= pause_gate

    # per-joint integration: random axis, gain, and a direction that flips
    # at every beat so angles stay bounded
    axes = rng.standard_normal((n_joints, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    gains = rng.uniform(0.6, 1.4, size=n_joints)
    signs = rng.choice([-1.0, 1.0], size=n_joints)
    n_beats_before = np.searchsorted(beat_frames, mid)
    direction = signs[:, None] * (-1.0) ** n_beats_before[None, :]
    theta0 = rng.uniform(-0.3, 0.3, size=n_joints)
    steps = direction * gains[:, None] * speed[None, :] / fps
    theta = theta0[:, None] + np.concatenate(
        [np.zeros((n_joints, 1)), np.cumsum(steps, axis=1)], axis=1
    )

    rot = axis_angle_matrix(axes[:, None, :], theta)  # (J, T, 3, 3)

    if semantic_interval is not None:
        # arm-raise excursion over the semantic word; its angular velocity is
        # gated by the beat pauses so embedded beats stay recoverable
        ws, we = semantic_interval
        u = np.clip((frames_t - ws) / (we - ws), 0.0, 1.0)
        motif_raw = _MOTIF_ANGLE * np.sin(np.pi * u) ** 2
        motif = motif_raw[0] + np.concatenate(
            [[0.0], np.cumsum(np.diff(motif_raw) * pause_gate)]
        )
        motif_rot = axis_angle_matrix(
            np.broadcast_to(_MOTIF_AXIS, (n_frames, 3)), motif
        )
        for j in _motif_joints(n_joints):
            rot[j] = motif_rot @ rot[j]

    features = rotation_to_6d(rot).transpose(1, 0, 2)  # (T, J, 6)
    style = STYLE_DELTA * (speaker_id - (n_speakers - 1) / 2.0)
    features = features + style + 0.003 * rng.standard_normal(features.shape)
    return MotionClip(frames=features.astype(np.float32), fps=fps)


def synth_clip(index, seed, n_frames, n_joints, n_speakers, fps=15.0,
               beat_period=BEAT_PERIOD_S):
    """Generate one triplet plus its embedded ground truth."""
    rng = _clip_rng(seed, index)
    speaker_id = index % n_speakers
    duration = n_frames / fps

    phase0 = rng.uniform(0.15, beat_period)
    beat_times = []
    t_b = phase0
    while t_b < duration - 3.0 / fps:
        beat_times.append(round(t_b, 6))
        t_b += beat_period
    beat_times = tuple(beat_times)

    n_slots = int(duration // WORD_SLOT_S)
    words = [VOCAB[1:][rng.integers(len(VOCAB) - 1)] for _ in range(n_slots)]
    semantic_interval = None
    if n_slots > 0 and rng.uniform() < SEMANTIC_PROB:
        slot = int(rng.integers(n_slots))
        words[slot] = SEMANTIC_WORD
    transcript = []
    for s, word in enumerate(words):
        start = s * WORD_SLOT_S + WORD_GAP_S / 2
        end = start + WORD_SLOT_S - WORD_GAP_S
        transcript.append(TranscriptWord(word=word, start=start, end=end))
        if word == SEMANTIC_WORD:
            semantic_interval = (start, end)

    motion = _synth_motion(
        rng, n_frames, n_joints, fps, beat_times, semantic_interval,
        speaker_id, n_speakers,
    )
    audio = _synth_audio(rng, duration, transcript, speaker_id, beat_times)
    triplet = Triplet(
        motion=motion, audio=audio, transcript=tuple(transcript), speaker_id=speaker_id
    )
    truth = ClipTruth(
        beat_times=beat_times,
        semantic_interval=semantic_interval,
        speaker_id=speaker_id,
    )
    return triplet, truth


def synth_corpus(n_clips, n_frames, n_joints, n_speakers, seed, fps=15.0,
                 beat_period=BEAT_PERIOD_S, return_truth=False):
    """Generate a deterministic corpus of beat-correlated triplets."""
    for name, value in (
        ("n_clips", n_clips), ("n_frames", n_frames), ("n_joints", n_joints),
        ("n_speakers", n_speakers),
    ):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    triplets, truths = [], []
    for i in range(n_clips):
        triplet, truth = synth_clip(
            i, seed, n_frames, n_joints, n_speakers, fps=fps, beat_period=beat_period
        )
        triplets.append(triplet)
        truths.append(truth)
    if return_truth:
        return triplets, truths
    return triplets


def write_corpus(triplets, out_dir) -> Path:
    """Write clips/audio/transcripts plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    for sub in ("clips", "audio", "text"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    for i, tr in enumerate(triplets):
        stem = f"clip_{i:05d}"
        clip_path = f"clips/{stem}.magm"
        audio_path = f"audio/{stem}.wav"
        text_path = f"text/{stem}.json"
        save_clip(tr.motion, out_dir / clip_path)
        pcm = np.round(tr.audio.samples.astype(np.float64) * 32767.0).astype(np.int16)
        wavfile.write(out_dir / audio_path, tr.audio.sample_rate, pcm)
        save_transcript(tr.transcript, out_dir / text_path)
        entries.append(
            {
                "clip": clip_path,
                "audio": audio_path,
                "transcript": text_path,
                "speaker_id": tr.speaker_id,
            }
        )
    manifest = out_dir / "manifest.json"
    manifest.write_text(
        json.dumps({"triplets": entries}, indent=2, sort_keys=True), encoding="utf-8"
    )
    return manifest


def load_wav(path) -> Waveform:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio")
    if data.dtype != np.int16:
        raise ValueError(f"{path}: expected 16-bit PCM, got {data.dtype}")
    samples = (data.astype(np.float64) / 32767.0).astype(np.float32)
    return Waveform(samples=samples, sample_rate=int(rate))


def load_corpus(manifest_path) -> list[Triplet]:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    root = manifest_path.parent
    payload = json.loads(manifest_path.read_text(encoding="utf-8"))
    triplets = []
    for entry in payload["triplets"]:
        triplets.append(
            Triplet(
                motion=load_clip(root / entry["clip"]),
                audio=load_wav(root / entry["audio"]),
                transcript=load_transcript(root / entry["transcript"]),
                speaker_id=int(entry["speaker_id"]),
            )
        )
    return triplets
