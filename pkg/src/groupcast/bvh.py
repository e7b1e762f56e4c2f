"""Axis-aligned bounding-volume hierarchy over a triangle mesh.

Construction is deterministic: nodes split at the median of triangle
centroids along the longest axis of the centroid bounds (stable sort), so
two builds of the same mesh produce identical trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMeshError
from .mesh import TriangleMesh

DEFAULT_MAX_LEAF = 4


@dataclass(frozen=True, eq=False)
class Bvh:
    """Flat-array BVH.

    Node ``i`` spans ``bounds_min[i]..bounds_max[i]``. Internal nodes carry
    child indices in ``left``/``right``; leaves have ``left == -1`` and list
    ``tri_count[i]`` triangles starting at ``tri_start[i]`` in ``tri_order``
    (a permutation of 0..T-1 of the source mesh).
    """

    bounds_min: np.ndarray  # (N, 3) float64
    bounds_max: np.ndarray  # (N, 3) float64
    left: np.ndarray        # (N,) int64, -1 for leaves
    right: np.ndarray       # (N,) int64, -1 for leaves
    tri_start: np.ndarray   # (N,) int64
    tri_count: np.ndarray   # (N,) int64
    tri_order: np.ndarray   # (T,) int64
    max_leaf: int

    @property
    def n_nodes(self) -> int:
        return self.bounds_min.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0


def build_bvh(mesh: TriangleMesh, max_leaf: int = DEFAULT_MAX_LEAF) -> Bvh:
    """Build a median-split BVH with at most ``max_leaf`` triangles per leaf.

    Splitting stops (making a leaf) when the count fits or all centroids
    coincide along every axis.
    """
    if max_leaf < 1:
        raise ValueError("max_leaf must be >= 1")
    if mesh.n_triangles < 1:
        raise EmptyMeshError("cannot build a BVH over an empty mesh")

    tri_verts = mesh.vertices[mesh.triangles]          # (T, 3, 3)
    tri_min = tri_verts.min(axis=1)                    # (T, 3)
    tri_max = tri_verts.max(axis=1)
    centroids = (tri_min + tri_max) * 0.5

    bounds_min: list[np.ndarray] = []
    bounds_max: list[np.ndarray] = []
    left: list[int] = []
    right: list[int] = []
    tri_start: list[int] = []
    tri_count: list[int] = []

    order = np.arange(mesh.n_triangles, dtype=np.int64)

    def new_node(tris: np.ndarray) -> int:
        idx = len(bounds_min)
        bounds_min.append(tri_min[tris].min(axis=0))
        bounds_max.append(tri_max[tris].max(axis=0))
        left.append(-1)
        right.append(-1)
        tri_start.append(0)
        tri_count.append(0)
        return idx

    out_order: list[np.ndarray] = []
    out_cursor = 0

    # (node index, triangle ids) work stack; children pushed right-then-left
    # so the flattened layout is preorder.
    stack: list[tuple[int, np.ndarray]] = [(new_node(order), order)]
    while stack:
        node, tris = stack.pop()
        make_leaf = tris.shape[0] <= max_leaf
        if not make_leaf:
            c = centroids[tris]
            span = c.max(axis=0) - c.min(axis=0)
            axis = int(np.argmax(span))
            if span[axis] <= 0.0:
                make_leaf = True  # all centroids coincide; cannot split
            else:
                key = np.argsort(c[:, axis], kind="stable")
                half = tris.shape[0] // 2
                lt, rt = tris[key[:half]], tris[key[half:]]
                li = new_node(lt)
                ri = new_node(rt)
                left[node] = li
                right[node] = ri
                stack.append((ri, rt))
                stack.append((li, lt))
        if make_leaf:
            tri_start[node] = out_cursor
            tri_count[node] = tris.shape[0]
            out_order.append(tris)
            out_cursor += tris.shape[0]

    return Bvh(
        bounds_min=np.array(bounds_min),
        bounds_max=np.array(bounds_max),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        tri_start=np.array(tri_start, dtype=np.int64),
        tri_count=np.array(tri_count, dtype=np.int64),
        tri_order=np.concatenate(out_order),
        max_leaf=max_leaf,
    )
