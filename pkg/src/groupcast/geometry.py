"""Rigid-transform and Euler-angle math.

Conventions used everywhere in this package:

- Rotations are 3x3 orthonormal matrices (det +1) acting on column vectors,
  so ``p_world = R @ p_local + t``.
- Euler angles follow the intrinsic Z-Y-X convention:
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
  roll and yaw live in (-pi, pi], pitch in [-pi/2, pi/2].
- Quaternions appear only at file boundaries, scalar-first ``(w, x, y, z)``,
  and are normalized on load (rejected if off unit length by more than 1e-6).

All types are immutable values and all operations are pure functions, so they
are safe to call from any number of concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GimbalLockError

ORTHONORMAL_TOL = 1e-9
GIMBAL_LOCK_TOL = 1e-6
QUAT_NORM_TOL = 1e-6


def _wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def _frozen_array(x, shape) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array components must be finite")
    arr.flags.writeable = False
    return arr


def check_rotation(r: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    """Raise ValueError unless ``r`` is orthonormal with det +1 within tol."""
    drift = np.abs(r @ r.T - np.eye(3)).max()
    if drift > tol:
        raise ValueError(f"rotation not orthonormal (drift {drift:.3e})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > tol:
        raise ValueError(f"rotation determinant {det} != +1")


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) via SVD."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=np.float64))
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


@dataclass(frozen=True)
class EulerRPY:
    """Roll/pitch/yaw angles in radians (intrinsic Z-Y-X factor order).

    ``gimbal_lock`` is set when the source rotation had |pitch| within
    GIMBAL_LOCK_TOL of +/-pi/2; yaw is then fixed to 0 by convention and the
    roll value absorbs the remaining degree of freedom.
    """

    roll: float
    pitch: float
    yaw: float
    gimbal_lock: bool = False


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) pose: rotation (3x3) plus translation (3,), both float64.

    Arrays are copied and frozen on construction; the rotation is validated
    against ORTHONORMAL_TOL.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3))
        trans = _frozen_array(self.translation, (3,))
        check_rotation(rot)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map one (3,) point or an (N, 3) batch into the parent frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        """Return the 4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies ``b`` first, then ``a``.

    The rotation product is re-orthonormalized if accumulated drift exceeds
    ORTHONORMAL_TOL, so long chains stay valid.
    """
    rot = a.rotation @ b.rotation
    if np.abs(rot @ rot.T - np.eye(3)).max() > ORTHONORMAL_TOL:
        rot = orthonormalize(rot)
    trans = a.rotation @ b.translation + a.translation
    return RigidTransform(rot, trans)


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: compose(t, invert(t)) is the identity."""
    rot = t.rotation.T
    return RigidTransform(rot, -(rot @ t.translation))


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_euler(e: EulerRPY) -> np.ndarray:
    """Build ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` in exactly that order."""
    return rot_z(e.yaw) @ rot_y(e.pitch) @ rot_x(e.roll)


def euler_from_rotation(r: np.ndarray) -> EulerRPY:
    """Decompose a rotation into Z-Y-X Euler angles.

    Away from gimbal lock, ``rotation_from_euler(euler_from_rotation(r))``
    reconstructs ``r`` within 1e-9. Within GIMBAL_LOCK_TOL of |pitch| = pi/2
    the yaw/roll split is not unique: yaw is set to 0, roll carries the
    remaining rotation, and the result is flagged via ``gimbal_lock``.
    """
    r = np.asarray(r, dtype=np.float64)
    check_rotation(r)
    sp = min(1.0, max(-1.0, -float(r[2, 0])))
    pitch = math.asin(sp)
    if math.pi / 2.0 - abs(pitch) < GIMBAL_LOCK_TOL:
        # r[0,1], r[0,2] collapse to +/-(sin, cos) of (roll -+ yaw)
        if pitch > 0.0:
            roll = math.atan2(float(r[0, 1]), float(r[0, 2]))
        else:
            roll = math.atan2(-float(r[0, 1]), -float(r[0, 2]))
        return EulerRPY(_wrap_angle(roll), pitch, 0.0, gimbal_lock=True)
    yaw = math.atan2(float(r[1, 0]), float(r[0, 0]))
    roll = math.atan2(float(r[2, 1]), float(r[2, 2]))
    return EulerRPY(_wrap_angle(roll), pitch, _wrap_angle(yaw))


def relative_frame(t_ref: RigidTransform, t_robot: RigidTransform) -> RigidTransform:
    """Hybrid frame mixing the robot's planar pose with the reference tilt.

    Translation takes x, y from ``t_robot`` and z from ``t_ref`` (exactly,
    component copies). Rotation is ``Rz(yaw_robot) @ Ry(pitch_ref) @
    Rx(roll_ref)``. Local tracking errors are evaluated in this frame.

    Raises:
        GimbalLockError: if either input's pitch is within GIMBAL_LOCK_TOL of
            +/-pi/2, where the yaw/roll split (and hence this frame) is
            ill-defined.
    """
    e_ref = euler_from_rotation(t_ref.rotation)
    e_robot = euler_from_rotation(t_robot.rotation)
    if e_ref.gimbal_lock or e_robot.gimbal_lock:
        raise GimbalLockError("reference or robot pitch at +/-pi/2")
    rot = rotation_from_euler(EulerRPY(e_ref.roll, e_ref.pitch, e_robot.yaw))
    trans = np.array(
        [t_robot.translation[0], t_robot.translation[1], t_ref.translation[2]]
    )
    return RigidTransform(rot, trans)


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation (axis-angle magnitude), in [0, pi]."""
    c = (float(np.trace(r)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def quat_to_rotation(q, normalize_tol: float = QUAT_NORM_TOL) -> np.ndarray:
    """Convert a scalar-first quaternion to a rotation matrix.

    The quaternion is normalized first; a norm off unit by more than
    ``normalize_tol`` is rejected with ValueError.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got {q.shape}")
    n = float(np.linalg.norm(q))
    if abs(n - 1.0) > normalize_tol:
        raise ValueError(f"quaternion norm {n} off unit by more than {normalize_tol}")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a scalar-first unit quaternion (w >= 0)."""
    r = np.asarray(r, dtype=np.float64)
    tr = float(np.trace(r))
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def transform_to_row(t: RigidTransform) -> np.ndarray:
    """Serialize as 7 floats: tx ty tz qw qx qy qz (the file-format layout)."""
    return np.concatenate([t.translation, rotation_to_quat(t.rotation)])


def transform_from_row(row) -> RigidTransform:
    """Parse 7 floats (tx ty tz qw qx qy qz); quaternion normalized or rejected."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (7,):
        raise ValueError(f"pose row must have 7 values, got {row.shape}")
    return RigidTransform(quat_to_rotation(row[3:7]), row[0:3])
