"""Handle registry and the four binding operations."""

from __future__ import annotations

import threading
from typing import Sequence

import numpy as np

from groupcast.depth import DepthImage, NoiseConfig, apply_pipeline
from groupcast.errors import GroupcastError
from groupcast.geometry import transform_from_row
from groupcast.mesh import load_obj
from groupcast.raycast import CameraModel, cast_grouped, generate_camera_rays
from groupcast.scene import MeshInstance, Scene, seal_scene

CAMERA_PARAM_COUNT = 15
NOISE_PARAM_COUNT = 6


class FfiError(Exception):
    """Recoverable failure of a binding call; message carries the cause."""


_lock = threading.Lock()
_scenes: dict[int, Scene] = {}
_next_handle = 1


def _get_scene(handle: int) -> Scene:
    with _lock:
        scene = _scenes.get(handle)
    if scene is None:
        raise FfiError(f"invalid or released scene handle {handle}")
    return scene


def build_scene(prototype_paths: Sequence[str], proto_ids, group_ids, transforms) -> int:
    """Load prototype meshes, seal a scene, and return its handle.

    ``proto_ids``/``group_ids`` are (n,) integer buffers and ``transforms``
    an (n, 7) buffer of ``tx ty tz qw qx qy qz`` rows, one per instance.
    """
    global _next_handle
    try:
        pids = np.asarray(proto_ids, dtype=np.int64).reshape(-1)
        gids = np.asarray(group_ids, dtype=np.int64).reshape(-1)
        rows = np.asarray(transforms, dtype=np.float64).reshape(-1, 7)
    except (TypeError, ValueError) as e:
        raise FfiError(f"malformed instance buffers: {e}") from e
    if not (pids.shape[0] == gids.shape[0] == rows.shape[0]):
        raise FfiError(
            f"instance buffers disagree on count: {pids.shape[0]} prototype ids, "
            f"{gids.shape[0]} group ids, {rows.shape[0]} transforms"
        )
    try:
        meshes = [load_obj(p) for p in prototype_paths]
        instances = [
            MeshInstance(int(pids[i]), transform_from_row(rows[i]), int(gids[i]))
            for i in range(pids.shape[0])
        ]
        scene = seal_scene(meshes, instances)
    except (GroupcastError, OSError, ValueError) as e:
        raise FfiError(str(e)) from e
    with _lock:
        handle = _next_handle
        _next_handle += 1
        _scenes[handle] = scene
    return handle


def set_transforms(handle: int, indices, transforms) -> None:
    """Replace instance transforms; subsequent casts observe the update.

    ``indices`` is (k,) integers, ``transforms`` (k, 7) pose rows. The swap
    is atomic with respect to concurrent casts.
    """
    try:
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        rows = np.asarray(transforms, dtype=np.float64).reshape(-1, 7)
    except (TypeError, ValueError) as e:
        raise FfiError(f"malformed transform buffers: {e}") from e
    if idx.shape[0] != rows.shape[0]:
        raise FfiError(f"{idx.shape[0]} indices but {rows.shape[0]} transforms")
    with _lock:
        scene = _scenes.get(handle)
        if scene is None:
            raise FfiError(f"invalid or released scene handle {handle}")
        try:
            poses = [transform_from_row(r) for r in rows]
            _scenes[handle] = scene.with_transforms(idx.tolist(), poses)
        except (GroupcastError, IndexError, ValueError) as e:
            raise FfiError(str(e)) from e


def cast_depth(handle: int, camera_params, group_id: int, noise_params=None) -> np.ndarray:
    """Render one depth image; returns a row-major (height, width) array.

    Without noise params the array is metric depth with misses at the far
    clip. With the 6-value noise buffer the full post-processing chain
    (noise, patches, inpaint, clip/normalize) runs and values are in [0, 1].
    """
    scene = _get_scene(handle)
    cam = np.asarray(camera_params, dtype=np.float64).reshape(-1)
    if cam.shape[0] != CAMERA_PARAM_COUNT:
        raise FfiError(
            f"camera buffer needs {CAMERA_PARAM_COUNT} values, got {cam.shape[0]}"
        )
    try:
        model = CameraModel(
            width=int(cam[0]), height=int(cam[1]),
            fx=cam[2], fy=cam[3], cx=cam[4], cy=cam[5],
            near=cam[6], far=cam[7],
            pose=transform_from_row(cam[8:15]),
        )
        depth = cast_grouped(generate_camera_rays(model, int(group_id)), scene)
    except (GroupcastError, ValueError) as e:
        raise FfiError(str(e)) from e
    if noise_params is None:
        return depth.image().copy()
    noise = np.asarray(noise_params, dtype=np.float64).reshape(-1)
    if noise.shape[0] != NOISE_PARAM_COUNT:
        raise FfiError(f"noise buffer needs {NOISE_PARAM_COUNT} values, got {noise.shape[0]}")
    try:
        cfg = NoiseConfig(
            gaussian_sigma=float(noise[0]),
            patch_count_range=(int(noise[1]), int(noise[2])),
            patch_size_range=(int(noise[3]), int(noise[4])),
            seed=int(noise[5]),
        )
        out = apply_pipeline(DepthImage.from_depth_map(depth), cfg, model.near, model.far)
    except (GroupcastError, ValueError) as e:
        raise FfiError(str(e)) from e
    return out.values.copy()


def release(handle: int) -> None:
    """Drop the scene behind the handle; later use is a reported error."""
    with _lock:
        if handle not in _scenes:
            raise FfiError(f"invalid or released scene handle {handle}")
        del _scenes[handle]
