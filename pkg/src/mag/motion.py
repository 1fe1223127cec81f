"""Motion representation: rotation clips, body partitioning, kinematics.

Motion is stored as T x J x 6 arrays of continuous 6D rotation features
(two stacked matrix columns). The 6D features are unconstrained floats;
:func:`rotation_from_6d` orthonormalizes them with Gram-Schmidt whenever an
actual rotation matrix is needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import containers


@dataclass(frozen=True)
class MotionClip:
    """A motion sequence of T frames over J joints in 6D rotation features."""

    frames: np.ndarray  # (T, J, 6) float32
    fps: float
    joint_names: tuple[str, ...] = ()

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 3 or frames.shape[2] != 6:
            raise ValueError(f"frames must be (T, J, 6), got {frames.shape}")
        if frames.shape[0] < 2:
            raise ValueError(f"need T >= 2 frames, got {frames.shape[0]}")
        if frames.shape[1] < 1:
            raise ValueError("need at least one joint")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not np.isfinite(frames).all():
            raise ValueError("frames contain non-finite values")
        object.__setattr__(self, "frames", frames)
        if self.joint_names and len(self.joint_names) != frames.shape[1]:
            raise ValueError("joint_names length does not match joint count")
        if not self.joint_names:
            object.__setattr__(
                self, "joint_names", tuple(f"joint_{i}" for i in range(frames.shape[1]))
            )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]

    @property
    def duration(self) -> float:
        return self.n_frames / self.fps


@dataclass(frozen=True)
class BodyPartition:
    """Disjoint joint index sets for the upper body, hands, and lower body."""

    upper: tuple[int, ...]
    hands: tuple[int, ...]
    lower: tuple[int, ...]

    def __post_init__(self):
        for name in ("upper", "hands", "lower"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"partition part {name!r} is empty")
        all_idx = self.upper + self.hands + self.lower
        if len(set(all_idx)) != len(all_idx):
            raise ValueError("partition parts overlap")

    @property
    def parts(self) -> tuple[tuple[int, ...], ...]:
        return (self.upper, self.hands, self.lower)

    @property
    def part_names(self) -> tuple[str, str, str]:
        return ("upper", "hands", "lower")

    @property
    def n_joints(self) -> int:
        return len(self.upper) + len(self.hands) + len(self.lower)

    def validate_for(self, n_joints: int) -> None:
        covered = set(self.upper) | set(self.hands) | set(self.lower)
        if covered != set(range(n_joints)):
            missing = sorted(set(range(n_joints)) - covered)
            extra = sorted(covered - set(range(n_joints)))
            raise ValueError(
                f"partition does not cover joints 0..{n_joints - 1}: "
                f"missing {missing}, out of range {extra}"
            )


@dataclass(frozen=True)
class TranscriptWord:
    word: str
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start >= 0:
            raise ValueError(f"bad word interval [{self.start}, {self.end})")


@dataclass(frozen=True)
class Waveform:
    """Mono PCM audio held as float32 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError("waveform must be mono (1-D)")
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class Triplet:
    """One training sample: motion, its audio, transcript, and speaker id."""

    motion: MotionClip
    audio: Waveform
    transcript: tuple[TranscriptWord, ...]
    speaker_id: int

    def __post_init__(self):
        object.__setattr__(self, "transcript", tuple(self.transcript))
        min_duration = (self.motion.n_frames - 1) / self.motion.fps
        if self.audio.duration < min_duration - 1e-9:
            raise ValueError(
                f"audio ({self.audio.duration:.3f}s) shorter than motion minus one "
                f"frame ({min_duration:.3f}s)"
            )
        prev_end = 0.0
        for w in self.transcript:
            if w.start < prev_end - 1e-9:
                raise ValueError(f"word {w.word!r} overlaps the previous word")
            if w.end > self.audio.duration + 1e-6:
                raise ValueError(f"word {w.word!r} ends after the audio")
            prev_end = w.end
        if self.speaker_id < 0:
            raise ValueError("speaker_id must be non-negative")


def save_clip(clip: MotionClip, path) -> None:
    containers.write_clip_array(path, clip.frames, clip.fps)


def load_clip(path) -> MotionClip:
    frames, fps = containers.read_clip_array(path)
    return MotionClip(frames=frames, fps=fps)


def save_transcript(transcript, path) -> None:
    payload = [{"word": w.word, "start": w.start, "end": w.end} for w in transcript]
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_transcript(path) -> tuple[TranscriptWord, ...]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(TranscriptWord(e["word"], e["start"], e["end"]) for e in payload)


def split_parts(clip: MotionClip, partition: BodyPartition):
    """Split a clip into (upper, hands, lower) clips sharing T and fps."""
    partition.validate_for(clip.n_joints)
    out = []
    for idx in partition.parts:
        frames = clip.frames[:, list(idx), :]
        names = tuple(clip.joint_names[i] for i in idx)
        out.append(MotionClip(frames=frames, fps=clip.fps, joint_names=names))
    return tuple(out)


def merge_parts(parts, partition: BodyPartition) -> MotionClip:
    """Inverse of :func:`split_parts`: reassemble joints in index order."""
    upper, hands, lower = parts
    n_joints = partition.n_joints
    t = upper.n_frames
    frames = np.zeros((t, n_joints, 6), dtype=np.float32)
    names = [""] * n_joints
    for part_clip, idx in zip((upper, hands, lower), partition.parts):
        if part_clip.n_frames != t or part_clip.fps != upper.fps:
            raise ValueError("parts disagree on frame count or fps")
        for local, joint in enumerate(idx):
            frames[:, joint, :] = part_clip.frames[:, local, :]
            names[joint] = part_clip.joint_names[local]
    return MotionClip(frames=frames, fps=upper.fps, joint_names=tuple(names))


def default_partition(n_joints: int) -> BodyPartition:
    """Upper/hands/lower split: humanoid layout at J=13, contiguous thirds otherwise."""
    if n_joints == 13:
        # matches the synthetic skeleton in mag.render
        return BodyPartition(upper=(1, 2, 3, 4, 5, 6), hands=(7, 8), lower=(0, 9, 10, 11, 12))
    if n_joints < 3:
        raise ValueError("need at least 3 joints for a three-way partition")
    third = n_joints // 3
    return BodyPartition(
        upper=tuple(range(third)),
        hands=tuple(range(third, 2 * third)),
        lower=tuple(range(2 * third, n_joints)),
    )


def finite_difference(values: np.ndarray, order: int, fps: float) -> np.ndarray:
    """Forward differences along axis 0, scaled to per-second units.

    order=1 returns (T-1) velocities scaled by fps; order=2 returns (T-2)
    accelerations scaled by fps^2.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    values = np.asarray(values)
    if values.shape[0] < order + 1:
        raise ValueError(f"need at least {order + 1} frames for order {order}")
    return np.diff(values, n=order, axis=0) * float(fps) ** order


def rotation_from_6d(features: np.ndarray, degenerate_tol: float = 1e-6) -> np.ndarray:
    """Orthonormalize (..., 6) features into (..., 3, 3) rotation matrices.

    Gram-Schmidt on the two stacked 3-vectors; the third column is their
    cross product. Features whose columns are near-parallel (cross-product
    norm below ``degenerate_tol``) fall back to the identity rotation.
    """
    features = np.asarray(features, dtype=np.float64)
    a = features[..., 0:3]
    b = features[..., 3:6]
    cross_norm = np.linalg.norm(np.cross(a, b), axis=-1)
    degenerate = cross_norm < degenerate_tol
    if degenerate.any():
        a = np.where(degenerate[..., None], [1.0, 0.0, 0.0], a)
        b = np.where(degenerate[..., None], [0.0, 1.0, 0.0], b)
    b1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b2 = b - np.sum(b * b1, axis=-1, keepdims=True) * b1
    b2 = b2 / np.linalg.norm(b2, axis=-1, keepdims=True)
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def rotation_to_6d(matrices: np.ndarray) -> np.ndarray:
    """First two columns of (..., 3, 3) rotation matrices as (..., 6) features."""
    matrices = np.asarray(matrices)
    return np.concatenate([matrices[..., :, 0], matrices[..., :, 1]], axis=-1)


def axis_angle_matrix(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices for unit ``axis`` (..., 3) and ``angle`` (...)."""
    axis = np.asarray(axis, dtype=np.float64)
    angle = np.asarray(angle, dtype=np.float64)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zeros = np.zeros_like(x)
    k = np.stack(
        [
            np.stack([zeros, -z, y], axis=-1),
            np.stack([z, zeros, -x], axis=-1),
            np.stack([-y, x, zeros], axis=-1),
        ],
        axis=-2,
    )
    eye = np.broadcast_to(np.eye(3), k.shape)
    s = np.sin(angle)[..., None, None]
    c = (1.0 - np.cos(angle))[..., None, None]
    return eye + s * k + c * (k @ k)


def geodesic_angles(features_a: np.ndarray, features_b: np.ndarray) -> np.ndarray:
    """Per-element rotation angle (radians) between two 6D feature arrays."""
    ra = rotation_from_6d(features_a)
    rb = rotation_from_6d(features_b)
    trace = np.einsum("...ij,...ij->...", ra, rb)
    cos = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    return np.arccos(cos)
