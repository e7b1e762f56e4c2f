"""Batched grouped ray casting, camera ray generation, and height scans.

``cast_grouped`` implements the two-phase strategy: the precomputed group
index narrows each ray to the static instances plus the instances sharing
the ray's group id, so work per ray does not grow with the number of other
agents' groups. ``cast_naive`` is the reference baseline that walks the
whole instance table per ray and filters by group id inline; both produce
identical depths.

Casting is pure with respect to the sealed scene and thread-safe; internal
parallelism writes disjoint per-ray slots of the output buffer only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels
from .bvh import Bvh
from .errors import EquivalenceFailureError
from .geometry import RigidTransform, invert
from .mesh import TriangleMesh
from .scene import Scene

UNIT_TOL = 1e-9


def set_workers(n: int) -> int:
    """Pin the casting worker count; returns the value actually applied."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


@dataclass(frozen=True, eq=False)
class Ray:
    """One ray: origin (3,), unit direction (3,), group id, max range in m."""

    origin: np.ndarray
    direction: np.ndarray
    group_id: int = -1
    max_range: float = 100.0

    def __post_init__(self):
        o = np.array(self.origin, dtype=np.float64)
        d = np.array(self.direction, dtype=np.float64)
        if o.shape != (3,) or d.shape != (3,):
            raise ValueError("origin and direction must be 3-vectors")
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(d))):
            raise ValueError("ray components must be finite")
        if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise ValueError("direction must be unit length")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be positive")
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


class RayBatch:
    """Contiguous arrays of rays sharing one max range.

    ``width``/``height`` record the image layout when the batch came from a
    camera (row-major, x fastest); free-form batches default to N x 1.
    """

    def __init__(self, origins, directions, group_ids, max_range: float,
                 width: int | None = None, height: int | None = None):
        self.origins = np.ascontiguousarray(origins, dtype=np.float64)
        self.directions = np.ascontiguousarray(directions, dtype=np.float64)
        self.group_ids = np.ascontiguousarray(group_ids, dtype=np.int64)
        self.max_range = float(max_range)
        n = self.origins.shape[0]
        if self.origins.shape != (n, 3) or self.directions.shape != (n, 3):
            raise ValueError("origins and directions must be (N, 3)")
        if self.group_ids.shape != (n,):
            raise ValueError("group_ids must be (N,)")
        if not (np.all(np.isfinite(self.origins)) and np.all(np.isfinite(self.directions))):
            raise ValueError("ray components must be finite")
        norms = np.linalg.norm(self.directions, axis=1)
        if n and np.abs(norms - 1.0).max() > UNIT_TOL:
            raise ValueError("directions must be unit length")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be positive")
        self.width = int(width) if width is not None else n
        self.height = int(height) if height is not None else (1 if n else 0)
        if self.width * self.height != n:
            raise ValueError("width * height must equal ray count")
        for a in (self.origins, self.directions, self.group_ids):
            a.flags.writeable = False

    @property
    def count(self) -> int:
        return self.origins.shape[0]


class DepthMap:
    """Per-ray nearest-hit distances arranged as a width x height image.

    A miss is encoded as ``max_range`` (the far value), so every entry lies
    in (0, max_range] and the array feeds straight into the noise pipeline.
    """

    def __init__(self, width: int, height: int, values, max_range: float):
        self.width = int(width)
        self.height = int(height)
        self.values = np.asarray(values, dtype=np.float64)
        self.max_range = float(max_range)
        if self.values.shape != (self.width * self.height,):
            raise ValueError("values must be a flat array of width*height entries")
        if self.values.size and not (
            np.all(self.values > 0.0) and np.all(self.values <= self.max_range)
        ):
            raise ValueError("depth values must lie in (0, max_range]")
        self.values.flags.writeable = False

    def image(self) -> np.ndarray:
        """Row-major (height, width) view."""
        return self.values.reshape(self.height, self.width)

    def miss_mask(self) -> np.ndarray:
        return self.values >= self.max_range


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera: intrinsics in pixels, pose maps camera to world.

    Camera frame follows the usual computer-vision layout: +x right,
    +y down, +z forward (the pose's third column is the viewing axis).
    """

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    pose: RigidTransform
    near: float
    far: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be positive")
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")
        if not (self.far > self.near > 0.0):
            raise ValueError("need far > near > 0")


def generate_camera_rays(cam: CameraModel, group_id: int) -> RayBatch:
    """One ray per pixel center through the pinhole, in row-major order."""
    ix = np.arange(cam.width, dtype=np.float64) + 0.5
    iy = np.arange(cam.height, dtype=np.float64) + 0.5
    u, v = np.meshgrid(ix, iy)  # (h, w)
    d_cam = np.stack(
        [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones_like(u)], axis=-1
    ).reshape(-1, 3)
    d_cam /= np.linalg.norm(d_cam, axis=1, keepdims=True)
    d_world = d_cam @ cam.pose.rotation.T
    origins = np.broadcast_to(cam.pose.translation, d_world.shape).copy()
    groups = np.full(d_world.shape[0], int(group_id), dtype=np.int64)
    return RayBatch(origins, d_world, groups, cam.far, width=cam.width, height=cam.height)


def _run_cast(batch: RayBatch, scene: Scene, naive: bool):
    pack = scene.pack
    out_t = np.full(batch.count, batch.max_range, dtype=np.float64)
    out_visits = np.zeros(batch.count, dtype=np.int64)
    if batch.count:
        _kernels.cast_batch(
            batch.origins, batch.directions, batch.group_ids, batch.max_range,
            pack.verts, pack.tris,
            pack.node_bmin, pack.node_bmax, pack.node_left, pack.node_right,
            pack.node_tri_start, pack.node_tri_count, pack.tri_order, pack.proto_root,
            pack.inst_proto, pack.inst_group, pack.inst_inv_rot, pack.inst_inv_trans,
            pack.group_keys, pack.group_off, pack.group_members, pack.static_members,
            naive,
            out_t, out_visits,
        )
    return DepthMap(batch.width, batch.height, out_t, batch.max_range), out_visits


def cast_grouped(batch: RayBatch, scene: Scene, return_visits: bool = False):
    """Depths using the precomputed group index (static + own group only).

    With ``return_visits`` the per-ray count of instances iterated is
    returned as well; it equals ``len(static) + len(own group)`` for every
    ray (own-group count is 0 when the ray carries the static id or an
    absent group).
    """
    depth, visits = _run_cast(batch, scene, naive=False)
    return (depth, visits) if return_visits else depth


def cast_naive(batch: RayBatch, scene: Scene, return_visits: bool = False):
    """Baseline: walk the whole instance table per ray, filter by group.

    Contract-identical to ``cast_grouped``; per-ray visits equal the total
    instance count.
    """
    depth, visits = _run_cast(batch, scene, naive=True)
    return (depth, visits) if return_visits else depth


def check_equivalence(batch: RayBatch, scene: Scene, tol: float = 1e-9) -> float:
    """Max |grouped - naive| over the batch; raises if above ``tol``."""
    a = cast_grouped(batch, scene).values
    b = cast_naive(batch, scene).values
    worst = float(np.abs(a - b).max()) if a.size else 0.0
    if worst > tol:
        raise EquivalenceFailureError(
            f"grouped and naive casts disagree by {worst:.3e} (tol {tol:.0e})"
        )
    return worst


def intersect(
    ray: Ray, mesh: TriangleMesh, bvh: Bvh, transform: RigidTransform
) -> float | None:
    """Nearest positive hit distance of one ray against one placed mesh.

    Returns None on a miss (no triangle within ``ray.max_range``).
    """
    inv = invert(transform)
    lo = inv.apply(ray.origin)
    ld = inv.rotation @ ray.direction
    t = _kernels.ray_mesh_nearest(
        lo[0], lo[1], lo[2], ld[0], ld[1], ld[2], ray.max_range,
        mesh.vertices, mesh.triangles,
        bvh.bounds_min, bvh.bounds_max, bvh.left, bvh.right,
        bvh.tri_start, bvh.tri_count, bvh.tri_order,
    )
    return float(t) if t < ray.max_range else None


def height_scan(
    grid_origin,
    grid_spacing: float,
    nx: int,
    ny: int,
    scene: Scene,
    group_id: int,
    max_drop: float = 100.0,
) -> np.ndarray:
    """Terrain heights under a regular grid of downward rays.

    Rays start at ``grid_origin.z`` above cells ``grid_origin.xy + (ix, iy)
    * spacing`` and return the z of the first surface below. Cells with
    nothing within ``max_drop`` report the floor sentinel
    ``grid_origin.z - max_drop``. Output is (ny, nx), x fastest.
    """
    if grid_spacing <= 0.0:
        raise ValueError("grid_spacing must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one cell")
    origin = np.asarray(grid_origin, dtype=np.float64)
    xs = origin[0] + np.arange(nx) * grid_spacing
    ys = origin[1] + np.arange(ny) * grid_spacing
    gx, gy = np.meshgrid(xs, ys)  # (ny, nx)
    origins = np.stack([gx, gy, np.full_like(gx, origin[2])], axis=-1).reshape(-1, 3)
    dirs = np.broadcast_to(np.array([0.0, 0.0, -1.0]), origins.shape).copy()
    groups = np.full(origins.shape[0], int(group_id), dtype=np.int64)
    batch = RayBatch(origins, dirs, groups, max_range=float(max_drop))
    depth = cast_grouped(batch, scene)
    return (origin[2] - depth.values).reshape(ny, nx)
