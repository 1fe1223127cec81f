"""Stick-figure rendering over a fixed synthetic skeleton.

Forward kinematics turns per-joint rotations into 3D joint positions along
a parent chain; frames are drawn orthographically as PNG images (one per
frame) plus a CSV of all joint positions. Output is emission-only and
byte-deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .motion import MotionClip, rotation_from_6d


@dataclass(frozen=True)
class Skeleton:
    parents: tuple[int, ...]  # -1 for the root
    offsets: np.ndarray  # (J, 3) bone vectors in the parent frame
    names: tuple[str, ...]


def _humanoid_13() -> Skeleton:
    names = (
        "pelvis", "spine", "head",
        "l_shoulder", "l_elbow", "r_shoulder", "r_elbow",
        "l_hand", "r_hand",
        "l_hip", "l_knee", "r_hip", "r_knee",
    )
    parents = (-1, 0, 1, 1, 3, 1, 5, 4, 6, 0, 9, 0, 11)
    offsets = np.array(
        [
            [0.0, 0.0, 0.0],     # pelvis
            [0.0, 0.5, 0.0],     # spine
            [0.0, 0.4, 0.0],     # head
            [-0.25, 0.35, 0.0],  # l_shoulder
            [-0.3, 0.0, 0.0],    # l_elbow
            [0.25, 0.35, 0.0],   # r_shoulder
            [0.3, 0.0, 0.0],     # r_elbow
            [-0.3, 0.0, 0.0],    # l_hand
            [0.3, 0.0, 0.0],     # r_hand
            [-0.15, -0.1, 0.0],  # l_hip
            [0.0, -0.45, 0.0],   # l_knee
            [0.15, -0.1, 0.0],   # r_hip
            [0.0, -0.45, 0.0],   # r_knee
        ]
    )
    return Skeleton(parents=parents, offsets=offsets, names=names)


def skeleton_for(n_joints: int) -> Skeleton:
    """The fixed 13-joint humanoid, or a fallback chain for other J."""
    if n_joints == 13:
        return _humanoid_13()
    parents = tuple(range(-1, n_joints - 1))
    offsets = np.tile([0.0, 0.3, 0.0], (n_joints, 1))
    offsets[0] = 0.0
    names = tuple(f"joint_{i}" for i in range(n_joints))
    return Skeleton(parents=parents, offsets=offsets, names=names)


def forward_kinematics(clip: MotionClip, skeleton: Skeleton | None = None) -> np.ndarray:
    """Joint positions (T, J, 3) from local rotations along the parent chain."""
    skeleton = skeleton or skeleton_for(clip.n_joints)
    if len(skeleton.parents) != clip.n_joints:
        raise ValueError("skeleton joint count does not match clip")
    rotations = rotation_from_6d(clip.frames)  # (T, J, 3, 3)
    t, j = clip.n_frames, clip.n_joints
    global_rot = np.zeros((t, j, 3, 3))
    positions = np.zeros((t, j, 3))
    for joint in range(j):
        parent = skeleton.parents[joint]
        if parent < 0:
            global_rot[:, joint] = rotations[:, joint]
            positions[:, joint] = 0.0
        else:
            positions[:, joint] = positions[:, parent] + np.einsum(
                "tab,b->ta", global_rot[:, parent], skeleton.offsets[joint]
            )
            global_rot[:, joint] = global_rot[:, parent] @ rotations[:, joint]
    return positions


def render_clip(clip: MotionClip, out_dir, size: int = 320) -> dict:
    """Write frame_xxxxx.png stick figures and positions.csv; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    skeleton = skeleton_for(clip.n_joints)
    positions = forward_kinematics(clip, skeleton)

    span = max(np.abs(positions[:, :, :2]).max(), 1e-6) * 1.2
    scale = size / (2 * span)

    def to_px(p):
        return (size / 2 + p[0] * scale, size / 2 - p[1] * scale)

    png_paths = []
    for f in range(clip.n_frames):
        img = Image.new("RGB", (size, size), (255, 255, 255))
        draw = ImageDraw.Draw(img)
        for joint, parent in enumerate(skeleton.parents):
            if parent >= 0:
                draw.line(
                    [to_px(positions[f, parent]), to_px(positions[f, joint])],
                    fill=(30, 30, 30), width=2,
                )
        for joint in range(clip.n_joints):
            x, y = to_px(positions[f, joint])
            draw.ellipse([x - 3, y - 3, x + 3, y + 3], fill=(200, 40, 40))
        path = out_dir / f"frame_{f:05d}.png"
        img.save(path, format="PNG")
        png_paths.append(str(path))

    csv_path = out_dir / "positions.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "joint", "name", "x", "y", "z"])
        for f in range(clip.n_frames):
            for joint in range(clip.n_joints):
                writer.writerow(
                    [
                        f, joint, skeleton.names[joint],
                        f"{positions[f, joint, 0]:.6f}",
                        f"{positions[f, joint, 1]:.6f}",
                        f"{positions[f, joint, 2]:.6f}",
                    ]
                )
    return {"pngs": png_paths, "csv": str(csv_path)}
