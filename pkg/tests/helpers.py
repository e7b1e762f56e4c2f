"""Shared random-data builders for the test suite."""

from __future__ import annotations

import numpy as np

from groupcast.geometry import RigidTransform, quat_to_rotation
from groupcast.mesh import TriangleMesh
from groupcast.metrics import RobotState
from groupcast.motion import MotionFrame


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return quat_to_rotation(q)


def random_transform(rng: np.random.Generator, scale: float = 2.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


def random_soup(rng: np.random.Generator, n_tris: int, extent: float = 1.0) -> TriangleMesh:
    n_verts = max(3, n_tris)
    verts = rng.uniform(-extent, extent, (n_verts, 3))
    tris = rng.integers(0, n_verts, (n_tris, 3))
    return TriangleMesh(verts, tris)


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_motion_frame(rng: np.random.Generator, n_joints: int = 3,
                        n_links: int = 2) -> MotionFrame:
    return MotionFrame(
        root=random_transform(rng),
        joint_pos=rng.uniform(-1.0, 1.0, n_joints),
        joint_vel=rng.uniform(-2.0, 2.0, n_joints),
        key_link_poses=tuple(random_transform(rng) for _ in range(n_links)),
        key_link_lin_vel=rng.uniform(-2.0, 2.0, (n_links, 3)),
        key_link_ang_vel=rng.uniform(-4.0, 4.0, (n_links, 3)),
    )


def state_like(frame: MotionFrame, **overrides) -> RobotState:
    kwargs = dict(
        root=frame.root,
        joint_pos=frame.joint_pos,
        joint_vel=frame.joint_vel,
        key_link_poses=frame.key_link_poses,
        key_link_lin_vel=frame.key_link_lin_vel,
        key_link_ang_vel=frame.key_link_ang_vel,
    )
    kwargs.update(overrides)
    return RobotState(**kwargs)
