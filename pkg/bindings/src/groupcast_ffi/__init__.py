"""Foreign-function surface over the groupcast core.

External training loops talk to the core through exactly four calls —
``build_scene``, ``set_transforms``, ``cast_depth``, ``release`` — using
opaque integer handles and flat numeric buffers only. No object graphs
cross this boundary, so the same surface maps directly onto C ABI / wasm /
RPC bindings later.

Contracts:

- every failure raises ``FfiError`` with a message; no input can crash or
  corrupt the host process, and a released or unknown handle is a reported
  error, never undefined behavior;
- results are bit-identical to calling the core natively with the same
  inputs and seeds;
- a handle may be cast from many threads concurrently; transform updates
  take an internal lock and swap in a new sealed scene atomically, so
  casts observe either the old or the new transforms, never a mix.

Buffer layouts (all float64 unless stated):

- instance records: ``proto_ids`` (n,) int, ``group_ids`` (n,) int,
  ``transforms`` (n, 7) rows of ``tx ty tz qw qx qy qz``;
- camera params, 15 values:
  ``[width, height, fx, fy, cx, cy, near, far, tx, ty, tz, qw, qx, qy, qz]``;
- noise params, 6 values:
  ``[gaussian_sigma, patch_count_min, patch_count_max, patch_size_min,
  patch_size_max, seed]``.
"""

from .api import FfiError, build_scene, cast_depth, release, set_transforms

__version__ = "0.1.0"

__all__ = ["FfiError", "build_scene", "set_transforms", "cast_depth", "release"]
