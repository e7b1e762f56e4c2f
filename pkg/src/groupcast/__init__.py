"""Collision-group-isolated ray casting and simulation-support utilities.

Subpackages by concern:

- ``geometry``: rigid transforms, Z-Y-X Euler math, the hybrid
  robot/reference frame used for local tracking errors.
- ``mesh`` / ``bvh`` / ``scene``: triangle prototypes, acceleration
  structures, instancing with per-instance collision groups.
- ``raycast``: batched grouped and naive casting, camera rays, height scans.
- ``depth`` / ``imgio``: sensor-noise pipeline and PFM/PGM I/O.
- ``motion`` / ``curriculum``: reference clips, failure-binned adaptive
  start sampling, stuck detection.
- ``metrics``: tracking errors, shaped reward, penalties, MPJPE.
- ``bench`` / ``config`` / ``cli``: benchmark harness and the CLI.
"""

from .bvh import Bvh, build_bvh
from .depth import DepthImage, NoiseConfig, apply_pipeline
from .errors import GroupcastError
from .geometry import EulerRPY, RigidTransform, compose, invert, relative_frame
from .mesh import TriangleMesh, load_obj
from .metrics import ErrorVector, PenaltyVector, RobotState, mpjpe, tracking_errors
from .motion import MotionClip, MotionFrame, load_clip, save_clip
from .raycast import CameraModel, DepthMap, Ray, RayBatch, cast_grouped, cast_naive
from .scene import STATIC_GROUP, GroupIndex, MeshInstance, Scene, build_group_index, seal_scene

__version__ = "0.1.0"

__all__ = [
    "Bvh",
    "build_bvh",
    "DepthImage",
    "NoiseConfig",
    "apply_pipeline",
    "GroupcastError",
    "EulerRPY",
    "RigidTransform",
    "compose",
    "invert",
    "relative_frame",
    "TriangleMesh",
    "load_obj",
    "ErrorVector",
    "PenaltyVector",
    "RobotState",
    "mpjpe",
    "tracking_errors",
    "MotionClip",
    "MotionFrame",
    "load_clip",
    "save_clip",
    "CameraModel",
    "DepthMap",
    "Ray",
    "RayBatch",
    "cast_grouped",
    "cast_naive",
    "STATIC_GROUP",
    "GroupIndex",
    "MeshInstance",
    "Scene",
    "build_group_index",
    "seal_scene",
    "__version__",
]
