"""Acceptance gate: one test per exit criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings. Budgets are asserted where a criterion carries one.
"""

import math
import time

import numpy as np
import pytest

from groupcast.bench import build_grouped_scene, random_batch, run_sweep
from groupcast.bvh import build_bvh
from groupcast.config import BenchConfig
from groupcast.curriculum import BinTable, SmoothingKernel, simulate_curriculum
from groupcast.depth import (
    DepthImage,
    NoiseConfig,
    apply_pipeline,
    clip_normalize,
    inpaint_holes,
)
from groupcast.geometry import (
    RigidTransform,
    compose,
    euler_from_rotation,
    relative_frame,
    rotation_from_euler,
)
from groupcast.mesh import make_quad
from groupcast.metrics import mpjpe
from groupcast.motion import MotionFrame
from groupcast.raycast import RayBatch, cast_grouped, cast_naive
from groupcast.scene import STATIC_GROUP, MeshInstance, seal_scene

from helpers import (
    random_motion_frame,
    random_rotation,
    random_soup,
    random_transform,
    random_unit_vectors,
)
from oracles import brute_force_batch_vec, euler_zyx_angles


def report(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def wrapped_diff(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2.0 * math.pi))


def test_criterion_grouped_naive_equivalence():
    """200 random scenes, 10k rays each: grouped == naive within 1e-9."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    total_rays = 0
    for i in range(200):
        n_groups = int(round(2.0 ** rng.uniform(0.0, 10.0)))          # <= 1024
        per_group = int(rng.integers(1, 17))                          # <= 16
        n_protos = int(rng.integers(1, 5))                            # <= 4
        protos = [random_soup(rng, int(rng.integers(8, 48)), extent=1.5)
                  for _ in range(n_protos)]
        insts = [MeshInstance(0, RigidTransform.identity(), STATIC_GROUP)]
        for g in range(n_groups):
            for _ in range(per_group):
                insts.append(
                    MeshInstance(int(rng.integers(0, n_protos)), random_transform(rng, 4.0), g)
                )
        scene = seal_scene(protos, insts)
        origins = rng.uniform(-5, 5, (10_000, 3))
        dirs = random_unit_vectors(rng, 10_000)
        groups = rng.integers(-1, n_groups, 10_000)
        batch = RayBatch(origins, dirs, groups, max_range=20.0)
        a = cast_grouped(batch, scene).values
        b = cast_naive(batch, scene).values
        worst = max(worst, float(np.abs(a - b).max()))
        total_rays += int((np.abs(a - b) <= 1e-9).sum())
    elapsed = time.time() - t0
    report(
        "grouped/naive equivalence (200 scenes x 10k rays)",
        worst <= 1e-9 and total_rays == 200 * 10_000 and elapsed < 300.0,
        f"max|diff|={worst:.2e}, agreeing rays={total_rays}/2000000, {elapsed:.1f}s",
    )


def test_criterion_work_scaling_and_speedup():
    """Visit-count identities exact; speedup strictly grows; >=5x at G=1024."""
    t0 = time.time()
    sweep = BenchConfig(group_counts=(8, 64, 256, 1024), instances_per_group=16,
                        rays=4096, repeats=3)
    # run_sweep raises if the static+own / total-count identities break
    rows = run_sweep(sweep, seed=7)
    speeds = [r.speedup for r in rows]
    strictly_up = all(b > a for a, b in zip(speeds, speeds[1:]))
    elapsed = time.time() - t0
    report(
        "work scaling: counters exact, speedup strictly increasing, >=5x at G=1024",
        strictly_up and speeds[-1] >= 5.0 and elapsed < 180.0,
        "speedups " + ", ".join(f"{s:.1f}x" for s in speeds) + f", {elapsed:.1f}s",
    )


def test_criterion_bvh_oracle():
    """20 random meshes (<=5000 tris), 1000 rays each vs exhaustive scan."""
    t0 = time.time()
    rng = np.random.default_rng(404)
    worst = 0.0
    classif_ok = True
    for i in range(20):
        mesh = random_soup(rng, int(rng.integers(100, 5001)), extent=1.5)
        scene = seal_scene([mesh], [MeshInstance(0, RigidTransform.identity(), STATIC_GROUP)])
        origins = rng.uniform(-2, 2, (1000, 3))
        dirs = random_unit_vectors(rng, 1000)
        batch = RayBatch(origins, dirs, np.zeros(1000, dtype=int), max_range=10.0)
        got = cast_grouped(batch, scene).values
        want = brute_force_batch_vec(origins, dirs, mesh.vertices, mesh.triangles, 10.0)
        classif_ok &= bool(np.array_equal(got >= 10.0, want >= 10.0))
        worst = max(worst, float(np.abs(got - want).max()))
    elapsed = time.time() - t0
    report(
        "BVH vs exhaustive scan (20 meshes x 1000 rays)",
        worst <= 1e-6 and classif_ok and elapsed < 60.0,
        f"max|dt|={worst:.2e}, hit/miss exact={classif_ok}, {elapsed:.1f}s",
    )


def test_criterion_relative_frame_suite():
    """10k random pairs: planar/heading from robot, height/tilt from reference."""
    rng = np.random.default_rng(99)
    n = 10_000
    worst_angle = 0.0
    worst_recon = 0.0
    fixed_ok = True
    for i in range(n):
        t_ref = random_transform(rng)
        t_robot = random_transform(rng)
        rel = relative_frame(t_ref, t_robot)
        roll_ref, pitch_ref, _ = euler_zyx_angles(t_ref.rotation)
        _, _, yaw_rob = euler_zyx_angles(t_robot.rotation)
        roll, pitch, yaw = euler_zyx_angles(rel.rotation)
        worst_angle = max(
            worst_angle,
            wrapped_diff(roll, roll_ref),
            abs(pitch - pitch_ref),
            wrapped_diff(yaw, yaw_rob),
        )
        assert rel.translation[0] == t_robot.translation[0]
        assert rel.translation[1] == t_robot.translation[1]
        assert rel.translation[2] == t_ref.translation[2]
        if i < 1000:
            same = relative_frame(t_ref, t_ref)
            fixed_ok &= bool(np.abs(same.rotation - t_ref.rotation).max() <= 1e-9)
            fixed_ok &= bool(np.array_equal(same.translation, t_ref.translation))
        # Euler round trip away from gimbal lock
        r = random_rotation(rng)
        e = euler_from_rotation(r)
        if not e.gimbal_lock and math.pi / 2 - abs(e.pitch) > 1e-3:
            worst_recon = max(worst_recon, float(np.abs(rotation_from_euler(e) - r).max()))
    report(
        "relative-frame suite (10k pairs)",
        worst_angle <= 1e-9 and worst_recon <= 1e-9 and fixed_ok,
        f"max angle err={worst_angle:.2e}, max euler recon={worst_recon:.2e}",
    )


def test_criterion_curriculum_suite():
    """Normalization, eps floor, locality, hard-bin dominance, 3:1 sampling."""
    rng = np.random.default_rng(31415)
    eps = 1e-3
    kernel = SmoothingKernel()

    # 10k iterations with a mixed failure model; check sum(P) each step
    table = BinTable(["a", "b", "c"], [3.5, 2.0, 1.2], t_bin=1.0)  # 4+2+2 bins
    probs = np.array([0.3, 0.05, 0.6, 0.1, 0.02, 0.4, 0.15, 0.25])

    def model(k, ts, r):
        for j in range(table.bin_of(k, ts), int(table.n_bins[k])):
            if r.random() < probs[table.offsets[k] + j]:
                lo, hi = table.bin_bounds(k, j)
                lo = max(lo, ts)
                return lo + r.random() * (hi - lo)
        return None

    trace = simulate_curriculum(table, model, 10_000, rng, kernel, eps)
    sums_ok = bool(np.abs(trace.sum(axis=1) - 1.0).max() <= 1e-9)
    floor_ok = bool(trace.min() > 0.0) and bool(
        table.probabilities().min() >= eps / table.weights.sum() - 1e-15
    )

    # smoothing is motion-local
    loc = BinTable(["a", "b"], [4.0, 4.0], t_bin=1.0)
    for x in (0.1, 1.2, 3.3):
        loc.record_failure(0, x)
    loc.update_weights(kernel, eps)
    locality_ok = bool(np.array_equal(loc.weights[4:], np.full(4, eps)))

    # single hard bin becomes and stays the strict argmax
    hard = BinTable(["a", "b"], [3.0, 2.0], t_bin=1.0)
    flat = hard.offsets[0] + 1
    lo, hi = hard.bin_bounds(0, 1)

    def hard_model(k, ts, r):
        if k != 0 or ts >= hi:
            return None
        return max(ts, (lo + hi) / 2)

    htrace = simulate_curriculum(hard, hard_model, 500, np.random.default_rng(2), kernel, eps)
    changed = np.flatnonzero(np.abs(np.diff(htrace[:, flat])) > 0)
    first = changed[0] + 1
    strict_max = all(
        htrace[it, flat] == htrace[it].max()
        and (htrace[it, flat] > np.delete(htrace[it], flat)).all()
        for it in range(first, htrace.shape[0])
    )

    # 3:1 weights reproduced within 2% over 100k draws
    ratio_table = BinTable(["m"], [2.0], t_bin=1.0)
    ratio_table.weights = np.array([3 * eps, eps])
    draw_rng = np.random.default_rng(8)
    picks = np.zeros(2, dtype=int)
    for _ in range(100_000):
        _, ts = ratio_table.sample_start(draw_rng)
        picks[ratio_table.bin_of(0, ts)] += 1
    ratio = picks[0] / picks[1]
    ratio_ok = abs(ratio - 3.0) / 3.0 <= 0.02

    report(
        "curriculum suite",
        sums_ok and floor_ok and locality_ok and strict_max and ratio_ok,
        f"sum(P) ok={sums_ok}, eps floor={floor_ok}, locality={locality_ok}, "
        f"hard-bin strict max={strict_max}, 3:1 ratio={ratio:.3f}",
    )


def test_criterion_depth_pipeline():
    """Seeded determinism, hole-free bounded inpainting, exact reduction."""
    rng = np.random.default_rng(606)
    base = DepthImage(rng.uniform(0.5, 4.5, (48, 48)), np.ones((48, 48), dtype=bool))
    cfg = NoiseConfig(gaussian_sigma=0.02, patch_count_range=(1, 4),
                      patch_size_range=(2, 6), seed=17)
    a = apply_pipeline(base, cfg, 0.5, 4.0)
    b = apply_pipeline(base, cfg, 0.5, 4.0)
    deterministic = bool(np.array_equal(a.values, b.values)) and a.values.tobytes() == b.values.tobytes()

    holes_ok = bounds_ok = True
    for seed in range(100):
        r = np.random.default_rng(seed)
        vals = r.uniform(0.5, 5.0, (48, 48))
        mask = r.random((48, 48)) > r.uniform(0.05, 0.6)
        if not mask.any():
            mask[0, 0] = True
        out = inpaint_holes(DepthImage(vals, mask))
        holes_ok &= bool(out.valid.all())
        bounds_ok &= bool(
            out.values.min() >= vals[mask].min() - 1e-12
            and out.values.max() <= vals[mask].max() + 1e-12
        )

    quiet = NoiseConfig(gaussian_sigma=0.0, patch_count_range=(0, 0), seed=1)
    reduced = apply_pipeline(base, quiet, 0.5, 4.0)
    reduction_exact = bool(
        np.array_equal(reduced.values, clip_normalize(base, 0.5, 4.0).values)
    )
    report(
        "depth pipeline",
        deterministic and holes_ok and bounds_ok and reduction_exact,
        f"deterministic={deterministic}, holes filled={holes_ok}, "
        f"bounds={bounds_ok}, quiet==clip_normalize={reduction_exact}",
    )


def test_criterion_metrics():
    """MPJPE_b rigid-world invariance (1000 transforms); MPJPE_g translation."""
    rng = np.random.default_rng(707)
    traj_a = [random_motion_frame(rng) for _ in range(12)]
    traj_b = [random_motion_frame(rng) for _ in range(12)]
    base0 = mpjpe(traj_a, traj_b, "base")
    worst = 0.0
    for _ in range(1000):
        g = random_transform(rng)
        moved = [
            MotionFrame(
                root=compose(g, f.root),
                joint_pos=f.joint_pos, joint_vel=f.joint_vel,
                key_link_poses=tuple(compose(g, p) for p in f.key_link_poses),
                key_link_lin_vel=f.key_link_lin_vel, key_link_ang_vel=f.key_link_ang_vel,
            )
            for f in traj_a
        ]
        worst = max(worst, abs(mpjpe(moved, traj_b, "base") - base0))

    delta = np.array([0.21, -0.13, 0.34])
    shifted = [
        MotionFrame(
            root=RigidTransform(f.root.rotation, f.root.translation + delta),
            joint_pos=f.joint_pos, joint_vel=f.joint_vel,
            key_link_poses=tuple(
                RigidTransform(p.rotation, p.translation + delta) for p in f.key_link_poses
            ),
            key_link_lin_vel=f.key_link_lin_vel, key_link_ang_vel=f.key_link_ang_vel,
        )
        for f in traj_a
    ]
    g_err = abs(mpjpe(shifted, traj_a, "global") - float(np.linalg.norm(delta)))
    report(
        "metrics: MPJPE_b invariance and MPJPE_g translation identity",
        worst <= 1e-9 and g_err <= 1e-9,
        f"max base drift={worst:.2e}, translation identity err={g_err:.2e}",
    )
