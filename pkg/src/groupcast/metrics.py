"""Tracking-error terms, shaped reward, penalty terms, and MPJPE metrics.

Root errors are global (world frame). Key-link pose errors are local: the
robot's links are expressed in the hybrid frame from
``geometry.relative_frame`` (planar pose from the robot, height and tilt
from the reference) and the reference links in the reference root frame,
so planar drift the hybrid frame absorbs does not count as local error.
Link velocity errors stay in the world frame. Rotation distances are
geodesic angles (axis-angle magnitude of the relative rotation).

The reward kernel is exponential in the squared error per term with
configurable scales and weights; the term set is fixed but none of the
scale values are calibrated defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import LengthMismatchError, SchemaMismatchError
from .geometry import RigidTransform, invert, relative_frame, rotation_angle
from .motion import MotionFrame


@dataclass(frozen=True, eq=False)
class RobotState:
    """Simulated robot snapshot used for error and penalty computation."""

    root: RigidTransform
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    key_link_poses: tuple[RigidTransform, ...]
    key_link_lin_vel: np.ndarray  # (L, 3)
    key_link_ang_vel: np.ndarray  # (L, 3)
    last_action: np.ndarray = field(default_factory=lambda: np.zeros(0))
    action: np.ndarray = field(default_factory=lambda: np.zeros(0))
    joint_torques: np.ndarray = field(default_factory=lambda: np.zeros(0))
    contact_flags: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        jp = np.asarray(self.joint_pos, dtype=np.float64)
        jv = np.asarray(self.joint_vel, dtype=np.float64)
        lv = np.asarray(self.key_link_lin_vel, dtype=np.float64)
        av = np.asarray(self.key_link_ang_vel, dtype=np.float64)
        la = np.asarray(self.last_action, dtype=np.float64)
        ac = np.asarray(self.action, dtype=np.float64)
        tq = np.asarray(self.joint_torques, dtype=np.float64)
        cf = np.asarray(self.contact_flags, dtype=bool)
        n_links = len(self.key_link_poses)
        if jp.shape != jv.shape or jp.ndim != 1:
            raise SchemaMismatchError("joint_pos and joint_vel must be equal-length vectors")
        if lv.shape != (n_links, 3) or av.shape != (n_links, 3):
            raise SchemaMismatchError("link velocities must be (n_links, 3)")
        if la.shape != ac.shape:
            raise SchemaMismatchError("action and last_action must have equal length")
        if tq.size and tq.shape != jp.shape:
            raise SchemaMismatchError("joint_torques must match joint count")
        for name, val in (
            ("joint_pos", jp), ("joint_vel", jv), ("key_link_lin_vel", lv),
            ("key_link_ang_vel", av), ("last_action", la), ("action", ac),
            ("joint_torques", tq), ("contact_flags", cf),
        ):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "key_link_poses", tuple(self.key_link_poses))

    @property
    def n_joints(self) -> int:
        return self.joint_pos.shape[0]

    @property
    def n_links(self) -> int:
        return len(self.key_link_poses)


@dataclass(frozen=True)
class ErrorVector:
    """Non-negative tracking-error magnitudes, one entry per reward term."""

    root_pos_err: float       # m
    root_rot_err: float       # rad
    link_pos_err: float       # m, mean over key links
    link_rot_err: float       # rad, mean over key links
    link_lin_vel_err: float   # m/s, mean over key links
    link_ang_vel_err: float   # rad/s, mean over key links

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class PenaltyVector:
    """Non-negative penalty magnitudes; zero when everything is in bounds."""

    action_rate: float
    joint_limit_violation: float
    undesired_contact: float
    torque_limit_violation: float


@dataclass(frozen=True)
class RewardConfig:
    """Per-term weight and scale for the exponential tracking reward.

    These values are tuning knobs with uncalibrated defaults; a term's
    reward is weight * exp(-(err / sigma)^2).
    """

    weights: tuple[float, ...] = (1.0,) * 6
    sigmas: tuple[float, ...] = (0.5, 0.5, 0.3, 0.5, 1.0, 3.0)

    def __post_init__(self):
        if len(self.weights) != 6 or len(self.sigmas) != 6:
            raise ValueError("need one weight and sigma per error term (6)")
        if any(s <= 0.0 for s in self.sigmas):
            raise ValueError("sigmas must be positive")


@dataclass(frozen=True)
class LimitTable:
    """Symmetric per-joint magnitude limits for positions and torques."""

    joint_pos: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joint_pos", np.asarray(self.joint_pos, dtype=np.float64))
        object.__setattr__(self, "torque", np.asarray(self.torque, dtype=np.float64))


def tracking_errors(
    state: RobotState, ref: MotionFrame, t_rel: RigidTransform | None = None
) -> ErrorVector:
    """Error magnitudes between a robot state and one reference frame.

    ``t_rel`` defaults to ``relative_frame(ref.root, state.root)``; pass it
    in when already computed for the step.
    """
    if state.n_links != ref.n_links or state.n_joints != ref.n_joints:
        raise SchemaMismatchError(
            f"state has {state.n_joints} joints / {state.n_links} links, "
            f"reference has {ref.n_joints} / {ref.n_links}"
        )
    if t_rel is None:
        t_rel = relative_frame(ref.root, state.root)

    root_pos_err = float(np.linalg.norm(state.root.translation - ref.root.translation))
    root_rot_err = rotation_angle(ref.root.rotation.T @ state.root.rotation)

    inv_rel = invert(t_rel)
    inv_ref_root = invert(ref.root)
    pos_errs, rot_errs = [], []
    for link_state, link_ref in zip(state.key_link_poses, ref.key_link_poses):
        p_state = inv_rel.apply(link_state.translation)
        p_ref = inv_ref_root.apply(link_ref.translation)
        pos_errs.append(np.linalg.norm(p_state - p_ref))
        r_state = inv_rel.rotation @ link_state.rotation
        r_ref = inv_ref_root.rotation @ link_ref.rotation
        rot_errs.append(rotation_angle(r_ref.T @ r_state))

    lin_err = float(np.linalg.norm(state.key_link_lin_vel - ref.key_link_lin_vel, axis=1).mean())
    ang_err = float(np.linalg.norm(state.key_link_ang_vel - ref.key_link_ang_vel, axis=1).mean())
    return ErrorVector(
        root_pos_err=root_pos_err,
        root_rot_err=root_rot_err,
        link_pos_err=float(np.mean(pos_errs)),
        link_rot_err=float(np.mean(rot_errs)),
        link_lin_vel_err=lin_err,
        link_ang_vel_err=ang_err,
    )


def reward(errors: ErrorVector, cfg: RewardConfig = RewardConfig()) -> float:
    """Sum of weight * exp(-(err/sigma)^2); maximal iff all errors vanish."""
    e = errors.as_array()
    w = np.asarray(cfg.weights)
    s = np.asarray(cfg.sigmas)
    return float(np.sum(w * np.exp(-((e / s) ** 2))))


def penalties(
    state: RobotState, limits: LimitTable, undesired_bodies: Iterable[int] = ()
) -> PenaltyVector:
    """Regularization terms: action rate, limit violations, bad contacts."""
    if limits.joint_pos.shape != (state.n_joints,) or limits.torque.shape != (state.n_joints,):
        raise SchemaMismatchError("limit tables must match the joint count")
    action_rate = float(np.sum((state.action - state.last_action) ** 2))
    joint_over = np.maximum(0.0, np.abs(state.joint_pos) - limits.joint_pos)
    torques = state.joint_torques if state.joint_torques.size else np.zeros(state.n_joints)
    torque_over = np.maximum(0.0, np.abs(torques) - limits.torque)
    contact = 0
    for b in undesired_bodies:
        if b < 0 or b >= state.contact_flags.shape[0]:
            raise SchemaMismatchError(f"contact body index {b} out of range")
        contact += int(state.contact_flags[b])
    return PenaltyVector(
        action_rate=action_rate,
        joint_limit_violation=float(np.sum(joint_over**2)),
        undesired_contact=float(contact),
        torque_limit_violation=float(np.sum(torque_over**2)),
    )


def mpjpe(states: Sequence, refs: Sequence, frame: str = "global") -> float:
    """Mean per-key-link position error over two synchronized trajectories.

    ``frame="global"`` compares link positions in world coordinates;
    ``frame="base"`` first expresses each trajectory's links in its own
    root frame (cancelling any rigid world offset). Elements only need
    ``root`` and ``key_link_poses`` attributes, so both robot states and
    reference frames work on either side.
    """
    if frame not in ("global", "base"):
        raise ValueError(f"frame must be 'global' or 'base', got {frame!r}")
    if len(states) != len(refs):
        raise LengthMismatchError(f"{len(states)} states vs {len(refs)} reference frames")
    if len(states) == 0:
        raise LengthMismatchError("need at least one frame")
    total = 0.0
    count = 0
    for a, b in zip(states, refs):
        if len(a.key_link_poses) != len(b.key_link_poses):
            raise SchemaMismatchError("link counts differ between trajectories")
        if frame == "base":
            inv_a, inv_b = invert(a.root), invert(b.root)
        for la, lb in zip(a.key_link_poses, b.key_link_poses):
            pa, pb = la.translation, lb.translation
            if frame == "base":
                pa, pb = inv_a.apply(pa), inv_b.apply(pb)
            total += float(np.linalg.norm(pa - pb))
            count += 1
    return total / count


def state_from_frame(frame: MotionFrame) -> RobotState:
    """Wrap a reference frame as a robot state (no actions/torques/contacts)."""
    return RobotState(
        root=frame.root,
        joint_pos=frame.joint_pos,
        joint_vel=frame.joint_vel,
        key_link_poses=frame.key_link_poses,
        key_link_lin_vel=frame.key_link_lin_vel,
        key_link_ang_vel=frame.key_link_ang_vel,
    )


def mean_tracking_errors(states: Sequence[RobotState], refs: Sequence[MotionFrame]) -> ErrorVector:
    """Per-term mean of tracking_errors over a trajectory pair."""
    if len(states) != len(refs):
        raise LengthMismatchError(f"{len(states)} states vs {len(refs)} reference frames")
    if len(states) == 0:
        raise LengthMismatchError("need at least one frame")
    acc = np.zeros(6)
    for s, r in zip(states, refs):
        acc += tracking_errors(s, r).as_array()
    acc /= len(states)
    return ErrorVector(*acc)
