"""Instanced scenes with per-instance collision groups.

A scene is a small table of mesh prototypes (each with its own BVH) plus a
batch of rigid instances referencing them. Instancing is real: instance
transforms never copy prototype vertex data. Each instance carries a
collision group id; group ``STATIC_GROUP`` (-1) marks geometry visible to
every ray, any other id is visible only to rays carrying the same id.

Scenes are build-then-freeze: ``seal_scene`` validates everything, builds
the group index and the flat arrays the casting kernels consume, and the
result is immutable. Updating transforms between casts goes through
``Scene.with_transforms``, which returns a new sealed scene sharing all
prototype data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .bvh import DEFAULT_MAX_LEAF, Bvh, build_bvh
from .errors import DanglingPrototypeError
from .geometry import RigidTransform, transform_from_row
from .mesh import TriangleMesh, load_obj

STATIC_GROUP = -1


@dataclass(frozen=True, eq=False)
class MeshInstance:
    """Placement of one prototype: transform plus collision group."""

    prototype_id: int
    transform: RigidTransform
    group_id: int = STATIC_GROUP

    def __post_init__(self):
        if self.prototype_id < 0:
            raise ValueError("prototype_id must be >= 0")
        if self.group_id < STATIC_GROUP:
            raise ValueError(f"group_id must be >= {STATIC_GROUP}")


class GroupIndex:
    """Precomputed map from group id to the instance indices in that group.

    Buckets keep first-appearance group order and insertion order inside
    each bucket, so two builds over the same instance list are identical.
    Absent groups read as empty.
    """

    def __init__(self, buckets: Mapping[int, Iterable[int]]):
        self._buckets = {int(g): tuple(int(i) for i in idx) for g, idx in buckets.items()}

    def instances_for(self, group_id: int) -> tuple[int, ...]:
        return self._buckets.get(int(group_id), ())

    @property
    def groups(self) -> tuple[int, ...]:
        return tuple(self._buckets.keys())

    def as_dict(self) -> dict[int, tuple[int, ...]]:
        return dict(self._buckets)

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupIndex) and self._buckets == other._buckets

    def __len__(self) -> int:
        return len(self._buckets)


def build_group_index(instances: Sequence[MeshInstance]) -> GroupIndex:
    """Partition instance indices by group id (the precompute pass)."""
    buckets: dict[int, list[int]] = {}
    for j, inst in enumerate(instances):
        buckets.setdefault(inst.group_id, []).append(j)
    return GroupIndex(buckets)


@dataclass(frozen=True, eq=False)
class ScenePack:
    """Flat numeric views of a sealed scene, laid out for the cast kernels.

    Triangle vertex indices and BVH child/leaf ranges are globalized so a
    single set of arrays serves every prototype; per-prototype roots live in
    ``proto_root``. Group membership is CSR over sorted group keys.
    """

    verts: np.ndarray          # (sum V, 3) float64
    tris: np.ndarray           # (sum T, 3) int64, global vertex ids
    node_bmin: np.ndarray      # (sum N, 3) float64
    node_bmax: np.ndarray      # (sum N, 3) float64
    node_left: np.ndarray      # (sum N,) int64, global node ids, -1 leaf
    node_right: np.ndarray     # (sum N,) int64
    node_tri_start: np.ndarray # (sum N,) int64, into tri_order
    node_tri_count: np.ndarray # (sum N,) int64
    tri_order: np.ndarray      # (sum T,) int64, global triangle ids
    proto_root: np.ndarray     # (P,) int64
    inst_proto: np.ndarray     # (K,) int64
    inst_group: np.ndarray     # (K,) int64
    inst_rot: np.ndarray       # (K, 3, 3) float64 local->world
    inst_trans: np.ndarray     # (K, 3) float64
    inst_inv_rot: np.ndarray   # (K, 3, 3) float64 world->local
    inst_inv_trans: np.ndarray # (K, 3) float64
    group_keys: np.ndarray     # (S,) int64 sorted
    group_off: np.ndarray      # (S + 1,) int64
    group_members: np.ndarray  # (K,) int64
    static_members: np.ndarray # (K_static,) int64

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            getattr(self, name).flags.writeable = False


def _pack_prototypes(prototypes: Sequence[tuple[TriangleMesh, Bvh]]):
    if not prototypes:
        empty3 = np.zeros((0, 3))
        empty_i = np.zeros(0, dtype=np.int64)
        return (
            empty3, np.zeros((0, 3), dtype=np.int64), empty3, empty3,
            empty_i, empty_i, empty_i, empty_i, empty_i, empty_i,
        )
    verts, tris, tri_order = [], [], []
    bmin, bmax, left, right, tstart, tcount, roots = [], [], [], [], [], [], []
    v_base = t_base = n_base = o_base = 0
    for mesh, bvh in prototypes:
        verts.append(mesh.vertices)
        tris.append(mesh.triangles + v_base)
        tri_order.append(bvh.tri_order + t_base)
        bmin.append(bvh.bounds_min)
        bmax.append(bvh.bounds_max)
        left.append(np.where(bvh.left >= 0, bvh.left + n_base, -1))
        right.append(np.where(bvh.right >= 0, bvh.right + n_base, -1))
        tstart.append(bvh.tri_start + o_base)
        tcount.append(bvh.tri_count)
        roots.append(n_base)
        v_base += mesh.n_vertices
        t_base += mesh.n_triangles
        n_base += bvh.n_nodes
        o_base += bvh.tri_order.shape[0]
    return (
        np.concatenate(verts, axis=0),
        np.concatenate(tris, axis=0),
        np.concatenate(bmin, axis=0),
        np.concatenate(bmax, axis=0),
        np.concatenate(left),
        np.concatenate(right),
        np.concatenate(tstart),
        np.concatenate(tcount),
        np.concatenate(tri_order),
        np.array(roots, dtype=np.int64),
    )


def _pack_instances(instances: Sequence[MeshInstance]):
    k = len(instances)
    inst_proto = np.fromiter((i.prototype_id for i in instances), dtype=np.int64, count=k)
    inst_group = np.fromiter((i.group_id for i in instances), dtype=np.int64, count=k)
    rot = np.stack([i.transform.rotation for i in instances]) if k else np.zeros((0, 3, 3))
    trans = np.stack([i.transform.translation for i in instances]) if k else np.zeros((0, 3))
    inv_rot = np.ascontiguousarray(rot.transpose(0, 2, 1))
    inv_trans = -np.einsum("kij,kj->ki", inv_rot, trans) if k else np.zeros((0, 3))
    return inst_proto, inst_group, rot, trans, inv_rot, inv_trans


def _pack_groups(group_index: GroupIndex, n_instances: int):
    keys = np.array(sorted(group_index.groups), dtype=np.int64)
    off = np.zeros(keys.shape[0] + 1, dtype=np.int64)
    members = np.empty(n_instances, dtype=np.int64)
    cur = 0
    for s, g in enumerate(keys):
        bucket = group_index.instances_for(int(g))
        members[cur : cur + len(bucket)] = bucket
        cur += len(bucket)
        off[s + 1] = cur
    static = np.array(group_index.instances_for(STATIC_GROUP), dtype=np.int64)
    return keys, off, members, static


@dataclass(frozen=True, eq=False)
class Scene:
    """Sealed, read-only scene; safe to share across casting workers."""

    prototypes: tuple[tuple[TriangleMesh, Bvh], ...]
    instances: tuple[MeshInstance, ...]
    group_index: GroupIndex
    pack: ScenePack

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_prototypes(self) -> int:
        return len(self.prototypes)

    def with_transforms(
        self, indices: Sequence[int], transforms: Sequence[RigidTransform]
    ) -> "Scene":
        """New sealed scene with the listed instance transforms replaced.

        Prototype meshes, BVHs, and the group index are shared, so this is
        the cheap way to move instances between casts.
        """
        if len(indices) != len(transforms):
            raise ValueError("indices and transforms must have equal length")
        insts = list(self.instances)
        for idx, t in zip(indices, transforms):
            idx = int(idx)
            if idx < 0 or idx >= len(insts):
                raise IndexError(f"instance index {idx} out of range")
            old = insts[idx]
            insts[idx] = MeshInstance(old.prototype_id, t, old.group_id)
        return _assemble(self.prototypes, tuple(insts), self.group_index)


def _assemble(
    prototypes: tuple[tuple[TriangleMesh, Bvh], ...],
    instances: tuple[MeshInstance, ...],
    group_index: GroupIndex,
) -> Scene:
    (verts, tris, bmin, bmax, left, right, tstart, tcount, tri_order, roots) = _pack_prototypes(
        prototypes
    )
    inst_proto, inst_group, rot, trans, inv_rot, inv_trans = _pack_instances(instances)
    keys, off, members, static = _pack_groups(group_index, len(instances))
    pack = ScenePack(
        verts=verts,
        tris=tris,
        node_bmin=bmin,
        node_bmax=bmax,
        node_left=left,
        node_right=right,
        node_tri_start=tstart,
        node_tri_count=tcount,
        tri_order=tri_order,
        proto_root=roots,
        inst_proto=inst_proto,
        inst_group=inst_group,
        inst_rot=rot,
        inst_trans=trans,
        inst_inv_rot=inv_rot,
        inst_inv_trans=inv_trans,
        group_keys=keys,
        group_off=off,
        group_members=members,
        static_members=static,
    )
    return Scene(prototypes=prototypes, instances=instances, group_index=group_index, pack=pack)


def seal_scene(
    prototypes: Sequence[TriangleMesh | tuple[TriangleMesh, Bvh]],
    instances: Sequence[MeshInstance],
    max_leaf: int = DEFAULT_MAX_LEAF,
) -> Scene:
    """Validate, index, and freeze a scene for casting.

    Prototypes may be bare meshes (BVHs are built here) or (mesh, bvh)
    pairs. Raises DanglingPrototypeError if any instance references a
    prototype index outside the table.
    """
    protos: list[tuple[TriangleMesh, Bvh]] = []
    for p in prototypes:
        if isinstance(p, TriangleMesh):
            protos.append((p, build_bvh(p, max_leaf)))
        else:
            mesh, bvh = p
            protos.append((mesh, bvh))
    for j, inst in enumerate(instances):
        if inst.prototype_id >= len(protos):
            raise DanglingPrototypeError(
                f"instance {j} references prototype {inst.prototype_id}, "
                f"only {len(protos)} prototypes exist"
            )
    insts = tuple(instances)
    return _assemble(tuple(protos), insts, build_group_index(insts))


def load_scene(path, max_leaf: int = DEFAULT_MAX_LEAF) -> Scene:
    """Load a scene description file and seal it.

    Expected YAML layout::

        prototypes:
          - meshes/floor.obj
          - meshes/box.obj
        instances:
          - {prototype: 0, translation: [0, 0, 0],
             quaternion: [1, 0, 0, 0], group: -1}

    Mesh paths are resolved relative to the scene file. ``quaternion`` is
    scalar-first and defaults to identity; ``group`` defaults to -1.
    """
    from pathlib import Path

    p = Path(path)
    with open(p, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "prototypes" not in doc or "instances" not in doc:
        raise ValueError(f"{path}: scene file needs 'prototypes' and 'instances'")
    unknown = set(doc) - {"prototypes", "instances"}
    if unknown:
        raise ValueError(f"{path}: unknown scene keys {sorted(unknown)}")
    meshes = [load_obj(p.parent / m) for m in doc["prototypes"]]
    instances = []
    for k, rec in enumerate(doc["instances"]):
        unknown = set(rec) - {"prototype", "translation", "quaternion", "group"}
        if unknown:
            raise ValueError(f"{path}: instance {k} has unknown keys {sorted(unknown)}")
        trans = rec.get("translation", [0.0, 0.0, 0.0])
        quat = rec.get("quaternion", [1.0, 0.0, 0.0, 0.0])
        row = np.array(list(trans) + list(quat), dtype=np.float64)
        instances.append(
            MeshInstance(
                prototype_id=int(rec["prototype"]),
                transform=transform_from_row(row),
                group_id=int(rec.get("group", STATIC_GROUP)),
            )
        )
    return seal_scene(meshes, instances, max_leaf=max_leaf)
