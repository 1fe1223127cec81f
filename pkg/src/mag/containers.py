"""Binary file containers: motion clips ("MAGM") and named f32 tensors ("MAGP").

Both formats are little-endian and fully deterministic: writing the same
payload twice produces byte-identical files, which is what makes checkpoint
and corpus replay checks meaningful.

Clip layout:
    magic "MAGM" | u32 version=1 | u32 T | u32 J | u32 rot_dim=6 | f32 fps
    | T*J*6 f32 values in (frame, joint, channel) row-major order

Tensor container layout:
    magic "MAGP" | u32 version=1 | u32 n_tensors
    then per tensor: u32 name_len | name (utf-8) | u32 ndim | u32 dims...
    | prod(dims) f32 values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

CLIP_MAGIC = b"MAGM"
PARAMS_MAGIC = b"MAGP"
FORMAT_VERSION = 1
ROT_DIM = 6


class ContainerFormatError(ValueError):
    """Malformed container file; ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerFormatError(
                f"{self.path}: truncated while reading {what}", self.pos
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, what: str) -> float:
        return struct.unpack("<f", self.take(4, what))[0]


def write_clip_array(path, frames: np.ndarray, fps: float) -> None:
    """Write a (T, J, 6) float32 array to the clip container format."""
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 3 or frames.shape[2] != ROT_DIM:
        raise ValueError(f"expected (T, J, {ROT_DIM}) array, got {frames.shape}")
    t, j, _ = frames.shape
    header = CLIP_MAGIC + struct.pack("<IIIIf", FORMAT_VERSION, t, j, ROT_DIM, fps)
    Path(path).write_bytes(header + frames.tobytes())


def read_clip_array(path) -> tuple[np.ndarray, float]:
    """Read a clip container, returning ((T, J, 6) float32 array, fps)."""
    r = _Reader(Path(path).read_bytes(), path)
    magic = r.take(4, "magic")
    if magic != CLIP_MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}", 0)
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"{path}: unsupported version {version}", 4)
    t = r.u32("frame count")
    j = r.u32("joint count")
    rot_dim = r.u32("rotation dim")
    if rot_dim != ROT_DIM:
        raise ContainerFormatError(f"{path}: rotation dim {rot_dim} != {ROT_DIM}", 12)
    fps = r.f32("fps")
    payload = r.take(t * j * rot_dim * 4, "frame payload")
    if r.pos != len(r.data):
        raise ContainerFormatError(f"{path}: {len(r.data) - r.pos} trailing bytes", r.pos)
    frames = np.frombuffer(payload, dtype="<f4").reshape(t, j, rot_dim).copy()
    return frames, fps


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named float32 arrays to the tensor container format.

    Tensors are written in dict insertion order, so the same dict always
    produces the same bytes.
    """
    parts = [PARAMS_MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_tensors(path) -> dict[str, np.ndarray]:
    """Read a tensor container back into {name: float32 array}."""
    r = _Reader(Path(path).read_bytes(), path)
    magic = r.take(4, "magic")
    if magic != PARAMS_MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}", 0)
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"{path}: unsupported version {version}", 4)
    count = r.u32("tensor count")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u32("name length")
        name = r.take(name_len, "tensor name").decode("utf-8")
        ndim = r.u32("ndim")
        shape = tuple(r.u32("dim") for _ in range(ndim))
        n_values = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = r.take(n_values * 4, f"tensor {name!r} payload")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if r.pos != len(r.data):
        raise ContainerFormatError(f"{path}: {len(r.data) - r.pos} trailing bytes", r.pos)
    return out
