"""Grouped-vs-naive benchmark harness.

Builds synthetic scenes with one shared static floor plus ``G`` collision
groups of box instances, verifies that both casting paths agree before any
timing, then reports per-ray nanoseconds for each path. Speedups are
reported as ratios and checked for monotone growth in ``G``; absolute
ratios are hardware-dependent and never asserted as fixed values. The
per-ray visited-instance counters are exact and are asserted as identities:
grouped visits = |static| + |own group|, naive visits = total instances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .config import BenchConfig
from .errors import EquivalenceFailureError
from .geometry import RigidTransform, rot_z
from .mesh import TriangleMesh, make_box, make_quad
from .raycast import RayBatch, cast_grouped, cast_naive, check_equivalence
from .scene import STATIC_GROUP, MeshInstance, Scene, seal_scene


def random_yaw_transform(rng: np.random.Generator, radius: float,
                         z_range=(0.0, 0.5)) -> RigidTransform:
    """Uniform placement in a disc with a random heading."""
    ang = rng.uniform(0.0, 2.0 * math.pi)
    r = radius * math.sqrt(rng.uniform())
    z = rng.uniform(*z_range)
    return RigidTransform(
        rot_z(rng.uniform(0.0, 2.0 * math.pi)),
        np.array([r * math.cos(ang), r * math.sin(ang), z]),
    )


def build_grouped_scene(
    n_groups: int,
    instances_per_group: int,
    rng: np.random.Generator,
    prototypes: list[TriangleMesh] | None = None,
    radius: float = 20.0,
) -> Scene:
    """Static floor plus ``n_groups`` groups of box instances in a disc."""
    if prototypes is None:
        prototypes = [make_quad(size=2.0 * radius + 10.0), make_box((0.5, 0.6, 0.4))]
    instances = [MeshInstance(0, RigidTransform.identity(), STATIC_GROUP)]
    for g in range(n_groups):
        for _ in range(instances_per_group):
            proto = 1 + int(rng.integers(0, len(prototypes) - 1)) if len(prototypes) > 1 else 0
            instances.append(MeshInstance(proto, random_yaw_transform(rng, radius), g))
    return seal_scene(prototypes, instances)


def random_batch(
    n_rays: int, n_groups: int, rng: np.random.Generator,
    radius: float = 20.0, max_range: float = 50.0,
) -> RayBatch:
    """Downward-biased rays from random stations with random group ids."""
    origins = np.empty((n_rays, 3))
    origins[:, 0] = rng.uniform(-radius, radius, n_rays)
    origins[:, 1] = rng.uniform(-radius, radius, n_rays)
    origins[:, 2] = rng.uniform(1.0, 3.0, n_rays)
    dirs = rng.normal(size=(n_rays, 3))
    dirs[:, 2] -= 1.0  # bias toward the floor so hits are common
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    groups = rng.integers(0, max(1, n_groups), n_rays).astype(np.int64)
    return RayBatch(origins, dirs, groups, max_range)


def _time_best(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


@dataclass(frozen=True)
class BenchRow:
    groups: int
    instances_per_group: int
    rays: int
    ns_per_ray_naive: float
    ns_per_ray_grouped: float
    speedup: float


def run_sweep(cfg: BenchConfig, seed: int = 0, tol: float = 1e-9) -> list[BenchRow]:
    """Equivalence-check then time both paths at every sweep point.

    Raises EquivalenceFailureError (aborting that point and the sweep)
    when grouped and naive disagree beyond ``tol``. Counter identities are
    verified here as well; wall-clock numbers are machine-specific.
    """
    rows: list[BenchRow] = []
    for g in cfg.group_counts:
        rng = np.random.default_rng(seed + g)
        scene = build_grouped_scene(g, cfg.instances_per_group, rng)
        batch = random_batch(cfg.rays, g, rng)
        check_equivalence(batch, scene, tol=tol)

        _, visits_g = cast_grouped(batch, scene, return_visits=True)
        _, visits_n = cast_naive(batch, scene, return_visits=True)
        n_static = len(scene.group_index.instances_for(STATIC_GROUP))
        own = np.array(
            [len(scene.group_index.instances_for(int(q))) for q in batch.group_ids]
        )
        if not np.array_equal(visits_g, n_static + own):
            raise EquivalenceFailureError("grouped visit counts break the static+own identity")
        if not np.array_equal(visits_n, np.full(batch.count, scene.n_instances)):
            raise EquivalenceFailureError("naive visit counts differ from the instance total")

        t_naive = _time_best(lambda: cast_naive(batch, scene), cfg.repeats)
        t_grouped = _time_best(lambda: cast_grouped(batch, scene), cfg.repeats)
        rows.append(
            BenchRow(
                groups=g,
                instances_per_group=cfg.instances_per_group,
                rays=cfg.rays,
                ns_per_ray_naive=1e9 * t_naive / cfg.rays,
                ns_per_ray_grouped=1e9 * t_grouped / cfg.rays,
                speedup=t_naive / t_grouped,
            )
        )
    return rows


def speedups_monotone(rows: list[BenchRow], strict: bool = False) -> bool:
    s = [r.speedup for r in rows]
    if strict:
        return all(b > a for a, b in zip(s, s[1:]))
    return all(b >= a for a, b in zip(s, s[1:]))
