"""Timed reference-motion clips and their text file format.

A clip is a fixed-rate sequence of frames; each frame carries the root
pose, joint positions/velocities, and per-key-link pose and velocities.
Poses serialize as ``tx ty tz qw qx qy qz`` (quaternion scalar-first,
normalized on load and rejected beyond 1e-6 off unit).

File layout (whitespace-separated, ``#`` comments allowed)::

    id <token>
    rate <hz>
    joints <J>
    links <L>
    frames <N>
    <N data lines, each with 7 + 2J + 13L numbers:
     root pose (7), joint_pos (J), joint_vel (J),
     then per link: pose (7), lin_vel (3), ang_vel (3)>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, transform_from_row, transform_to_row


@dataclass(frozen=True, eq=False)
class MotionFrame:
    """Snapshot of the reference at one time step."""

    root: RigidTransform
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    key_link_poses: tuple[RigidTransform, ...]
    key_link_lin_vel: np.ndarray  # (L, 3)
    key_link_ang_vel: np.ndarray  # (L, 3)

    def __post_init__(self):
        jp = np.asarray(self.joint_pos, dtype=np.float64)
        jv = np.asarray(self.joint_vel, dtype=np.float64)
        lv = np.asarray(self.key_link_lin_vel, dtype=np.float64)
        av = np.asarray(self.key_link_ang_vel, dtype=np.float64)
        n_links = len(self.key_link_poses)
        if jp.shape != jv.shape or jp.ndim != 1:
            raise ValueError("joint_pos and joint_vel must be equal-length vectors")
        if lv.shape != (n_links, 3) or av.shape != (n_links, 3):
            raise ValueError("link velocities must be (n_links, 3)")
        object.__setattr__(self, "joint_pos", jp)
        object.__setattr__(self, "joint_vel", jv)
        object.__setattr__(self, "key_link_poses", tuple(self.key_link_poses))
        object.__setattr__(self, "key_link_lin_vel", lv)
        object.__setattr__(self, "key_link_ang_vel", av)

    @property
    def n_joints(self) -> int:
        return self.joint_pos.shape[0]

    @property
    def n_links(self) -> int:
        return len(self.key_link_poses)


@dataclass(frozen=True, eq=False)
class MotionClip:
    """Fixed-rate frame sequence; duration spans first to last frame."""

    id: str
    frame_rate: float
    frames: tuple[MotionFrame, ...]

    def __post_init__(self):
        if self.frame_rate <= 0.0:
            raise ValueError("frame_rate must be positive")
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError("a clip needs at least 2 frames")
        j, l = frames[0].n_joints, frames[0].n_links
        for f in frames:
            if f.n_joints != j or f.n_links != l:
                raise ValueError("all frames must share joint/link counts")
        object.__setattr__(self, "frames", frames)

    @property
    def duration(self) -> float:
        return (len(self.frames) - 1) / self.frame_rate

    @property
    def n_joints(self) -> int:
        return self.frames[0].n_joints

    @property
    def n_links(self) -> int:
        return self.frames[0].n_links


def _frame_row(frame: MotionFrame) -> np.ndarray:
    parts = [transform_to_row(frame.root), frame.joint_pos, frame.joint_vel]
    for i, pose in enumerate(frame.key_link_poses):
        parts.append(transform_to_row(pose))
        parts.append(frame.key_link_lin_vel[i])
        parts.append(frame.key_link_ang_vel[i])
    return np.concatenate(parts)


def _frame_from_row(row: np.ndarray, n_joints: int, n_links: int) -> MotionFrame:
    expected = 7 + 2 * n_joints + 13 * n_links
    if row.shape != (expected,):
        raise ValueError(f"frame row needs {expected} values, got {row.shape[0]}")
    root = transform_from_row(row[0:7])
    c = 7
    jp = row[c : c + n_joints]; c += n_joints
    jv = row[c : c + n_joints]; c += n_joints
    poses, lin, ang = [], [], []
    for _ in range(n_links):
        poses.append(transform_from_row(row[c : c + 7])); c += 7
        lin.append(row[c : c + 3]); c += 3
        ang.append(row[c : c + 3]); c += 3
    return MotionFrame(
        root, jp, jv, tuple(poses),
        np.array(lin).reshape(n_links, 3), np.array(ang).reshape(n_links, 3),
    )


def save_clip(path, clip: MotionClip) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"id {clip.id}\n")
        fh.write(f"rate {clip.frame_rate:.9g}\n")
        fh.write(f"joints {clip.n_joints}\n")
        fh.write(f"links {clip.n_links}\n")
        fh.write(f"frames {len(clip.frames)}\n")
        for frame in clip.frames:
            fh.write(" ".join(f"{x:.17g}" for x in _frame_row(frame)) + "\n")


def load_clip(path) -> MotionClip:
    header: dict[str, str] = {}
    rows: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.strip().startswith("#")]
    pos = 0
    for key in ("id", "rate", "joints", "links", "frames"):
        tokens = lines[pos].split(None, 1)
        if len(tokens) != 2 or tokens[0] != key:
            raise ValueError(f"{path}: expected '{key} <value>' on line {pos + 1}")
        header[key] = tokens[1]
        pos += 1
    n_joints, n_links = int(header["joints"]), int(header["links"])
    n_frames = int(header["frames"])
    if len(lines) - pos != n_frames:
        raise ValueError(f"{path}: header says {n_frames} frames, found {len(lines) - pos}")
    for ln in lines[pos:]:
        rows.append(np.array([float(x) for x in ln.split()], dtype=np.float64))
    frames = tuple(_frame_from_row(r, n_joints, n_links) for r in rows)
    return MotionClip(id=header["id"], frame_rate=float(header["rate"]), frames=frames)
