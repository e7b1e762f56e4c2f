"""Triangle meshes and the Wavefront OBJ subset used for prototypes.

Only ``v`` and ``f`` lines are honored; faces with more than three corners
are fan-triangulated on load. Vertex data is float64 meters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMeshError


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable vertex/index mesh.

    vertices: (V, 3) float64, all finite.
    triangles: (T, 3) int64 vertex indices, T >= 1, every index < V.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64)
        tris = np.array(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {verts.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError(f"triangles must be (T, 3), got {tris.shape}")
        if tris.shape[0] < 1:
            raise EmptyMeshError("mesh has no triangles")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be finite")
        if tris.min(initial=0) < 0 or (verts.shape[0] and tris.max(initial=-1) >= verts.shape[0]):
            raise ValueError("triangle index out of range")
        verts.flags.writeable = False
        tris.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def load_obj(path) -> TriangleMesh:
    """Load the v/f subset of a Wavefront OBJ file.

    Face corners may carry texture/normal slots (``1/2/3``); only the vertex
    index is used. Indices may be 1-based positive or negative (relative to
    the vertices seen so far). Polygons become a triangle fan.
    """
    verts: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: vertex needs 3 coordinates")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif tag == "f":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: face needs at least 3 corners")
                idx = []
                for corner in parts[1:]:
                    i = int(corner.split("/")[0])
                    if i < 0:
                        i = len(verts) + i
                    else:
                        i = i - 1
                    if i < 0 or i >= len(verts):
                        raise ValueError(f"{path}:{lineno}: vertex index out of range")
                    idx.append(i)
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
            # other tags (vn, vt, o, g, s, usemtl, ...) are ignored
    if not tris:
        raise EmptyMeshError(f"{path}: no faces found")
    return TriangleMesh(np.array(verts), np.array(tris))


def save_obj(path, mesh: TriangleMesh) -> None:
    """Write a mesh back out as v/f lines (1-based indices)."""
    p = Path(path)
    with open(p, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def make_box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box with the given full extents, 12 triangles."""
    ex, ey, ez = (float(e) / 2.0 for e in extents)
    cx, cy, cz = center
    corners = np.array(
        [
            [cx - ex, cy - ey, cz - ez],
            [cx + ex, cy - ey, cz - ez],
            [cx + ex, cy + ey, cz - ez],
            [cx - ex, cy + ey, cz - ez],
            [cx - ex, cy - ey, cz + ez],
            [cx + ex, cy - ey, cz + ez],
            [cx + ex, cy + ey, cz + ez],
            [cx - ex, cy + ey, cz + ez],
        ]
    )
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom
            [4, 5, 6], [4, 6, 7],  # top
            [0, 1, 5], [0, 5, 4],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [1, 2, 6], [1, 6, 5],  # +x
            [3, 0, 4], [3, 4, 7],  # -x
        ]
    )
    return TriangleMesh(corners, faces)


def make_quad(size=1.0, z=0.0) -> TriangleMesh:
    """Square quad in the z-plane, centered at the origin, 2 triangles."""
    h = float(size) / 2.0
    verts = np.array([[-h, -h, z], [h, -h, z], [h, h, z], [-h, h, z]])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(verts, faces)
