"""Command-line entry point.

Subcommands: ``bench`` (grouped-vs-naive sweep), ``render`` (depth images
from a scene file), ``pipeline`` (noise chain over a directory of PFM
images), ``curriculum-sim`` (adaptive-sampling loop on synthetic failure
models), ``metrics`` (trajectory comparison between two clip files).

Every command is deterministic given (config, seed) apart from the
wall-clock columns of the bench CSV. CSV reports start with ``#``-prefixed
provenance lines carrying the resolved config. The output directory is
``$GROUPCAST_OUT`` when set, else ``--out``, else the working directory.
Exit status is nonzero on any validation or equivalence failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import Config, CurriculumConfig, load_config
from .curriculum import BinTable, simulate_curriculum
from .depth import DepthImage, apply_pipeline, denormalize
from .errors import GroupcastError
from .imgio import read_pfm, write_pfm, write_pgm16
from .metrics import mean_tracking_errors, mpjpe, state_from_frame
from .motion import load_clip
from .raycast import CameraModel, cast_grouped, generate_camera_rays, set_workers
from .scene import load_scene


def _write_csv(path: Path, provenance: list[str], columns: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in provenance:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _out_dir(args) -> Path:
    out = os.environ.get("GROUPCAST_OUT") or args.out or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _camera_model(cfg: Config) -> CameraModel:
    c = cfg.camera
    return CameraModel(
        width=c.width, height=c.height, fx=c.fx, fy=c.fy, cx=c.cx, cy=c.cy,
        pose=c.pose, near=c.near, far=c.far,
    )


def _resolve_seed(cfg: Config, args) -> int:
    return args.seed if args.seed is not None else cfg.seed


def cmd_bench(cfg: Config, args) -> int:
    seed = _resolve_seed(cfg, args)
    rows = bench_mod.run_sweep(cfg.bench, seed=seed)
    out = _out_dir(args) / "bench.csv"
    _write_csv(
        out,
        cfg.provenance() + [f"effective_seed={seed}"],
        ["groups", "instances_per_group", "rays", "ns_per_ray_naive",
         "ns_per_ray_grouped", "speedup"],
        [
            [r.groups, r.instances_per_group, r.rays,
             f"{r.ns_per_ray_naive:.1f}", f"{r.ns_per_ray_grouped:.1f}",
             f"{r.speedup:.3f}"]
            for r in rows
        ],
    )
    monotone = bench_mod.speedups_monotone(rows)
    print(f"wrote {out}")
    for r in rows:
        print(
            f"G={r.groups:5d}  naive {r.ns_per_ray_naive:10.1f} ns/ray  "
            f"grouped {r.ns_per_ray_grouped:10.1f} ns/ray  speedup {r.speedup:8.2f}x"
        )
    print(f"speedup monotone over sweep: {'yes' if monotone else 'NO'}")
    return 0 if monotone else 1


def cmd_render(cfg: Config, args) -> int:
    scene_path = args.scene or cfg.scene
    if scene_path is None:
        print("render: no scene file (pass --scene or set 'scene' in the config)",
              file=sys.stderr)
        return 1
    scene_path = Path(scene_path)
    if not scene_path.is_absolute():
        candidate = cfg.base_dir / scene_path
        scene_path = candidate if candidate.exists() else scene_path
    try:
        scene = load_scene(scene_path)
    except OSError as e:
        print(f"render: cannot load scene {scene_path}: {e}", file=sys.stderr)
        return 1
    cam = _camera_model(cfg)
    seed = _resolve_seed(cfg, args)
    depth = cast_grouped(generate_camera_rays(cam, cfg.camera.group), scene)
    img = DepthImage.from_depth_map(depth)
    noise = _reseed_noise(cfg, seed)
    processed = apply_pipeline(img, noise, cam.near, cam.far)

    out = _out_dir(args)
    prefix = args.prefix
    write_pfm(out / f"{prefix}_raw.pfm", img.values)
    write_pgm16(out / f"{prefix}_raw.pgm", img.values)
    write_pfm(out / f"{prefix}_proc.pfm", processed.values)
    write_pgm16(out / f"{prefix}_proc.pgm", denormalize(processed, cam.near, cam.far).values)
    print(f"wrote {out / prefix}_raw.(pfm|pgm) and {out / prefix}_proc.(pfm|pgm)")
    return 0


def _reseed_noise(cfg: Config, seed: int, offset: int = 0):
    from dataclasses import replace

    return replace(cfg.noise, seed=cfg.noise.seed + seed + offset)


def cmd_pipeline(cfg: Config, args) -> int:
    src = Path(args.input)
    files = sorted(src.glob("*.pfm"))
    if not files:
        print(f"pipeline: no .pfm files in {src}", file=sys.stderr)
        return 1
    cam = cfg.camera
    seed = _resolve_seed(cfg, args)
    out = _out_dir(args)
    for i, f in enumerate(files):
        img = DepthImage(read_pfm(f), np.ones_like(read_pfm(f), dtype=bool))
        processed = apply_pipeline(img, _reseed_noise(cfg, seed, offset=i), cam.near, cam.far)
        write_pfm(out / f"{f.stem}_proc.pfm", processed.values)
        write_pgm16(out / f"{f.stem}_proc.pgm", denormalize(processed, cam.near, cam.far).values)
    print(f"processed {len(files)} images into {out}")
    return 0


def _failure_model(ccfg: CurriculumConfig, table: BinTable):
    if ccfg.failure_kind == "never":
        return lambda k, t_start, rng: None
    if ccfg.failure_kind == "fixed_bin":
        lo, hi = table.bin_bounds(ccfg.failure_motion, ccfg.failure_bin)
        mid = (lo + hi) / 2.0

        def fixed(k, t_start, rng):
            if k != ccfg.failure_motion or t_start >= hi:
                return None
            return max(t_start, mid)

        return fixed
    probs = np.asarray(ccfg.failure_probs, dtype=np.float64)
    if probs.shape[0] != table.total_bins:
        raise GroupcastError(
            f"curriculum.failure.probs needs {table.total_bins} entries, got {probs.shape[0]}"
        )

    def per_bin(k, t_start, rng):
        for j in range(table.bin_of(k, t_start), int(table.n_bins[k])):
            if rng.random() < probs[table.offsets[k] + j]:
                lo, hi = table.bin_bounds(k, j)
                lo = max(lo, t_start)
                return lo + rng.random() * (hi - lo)
        return None

    return per_bin


def cmd_curriculum_sim(cfg: Config, args) -> int:
    c = cfg.curriculum
    seed = _resolve_seed(cfg, args)
    table = BinTable([m[0] for m in c.motions], [m[1] for m in c.motions], c.t_bin)
    model = _failure_model(c, table)
    rng = np.random.default_rng(seed)
    trace = simulate_curriculum(table, model, c.iterations, rng, c.kernel, c.eps,
                                c.count_decay)

    rows = []
    for it in range(trace.shape[0]):
        for k in range(table.n_motions):
            for j in range(int(table.n_bins[k])):
                rows.append([it, k, j, f"{trace[it, table.offsets[k] + j]:.9e}"])
    out = _out_dir(args) / "curriculum_trace.csv"
    _write_csv(out, cfg.provenance() + [f"effective_seed={seed}"],
               ["iteration", "motion", "bin", "p"], rows)
    print(f"wrote {out} ({c.iterations} iterations, {table.total_bins} bins)")
    return 0


def cmd_metrics(cfg: Config, args) -> int:
    clip_a = load_clip(args.file_a)
    clip_b = load_clip(args.file_b)
    states = [state_from_frame(f) for f in clip_a.frames]
    g = mpjpe(states, clip_b.frames, frame="global")
    b = mpjpe(states, clip_b.frames, frame="base")
    errs = mean_tracking_errors(states, clip_b.frames)
    out = _out_dir(args) / "metrics.csv"
    _write_csv(
        out,
        cfg.provenance() + [f"file_a={args.file_a}", f"file_b={args.file_b}"],
        ["mpjpe_global", "mpjpe_base", "root_pos_err", "root_rot_err",
         "link_pos_err", "link_rot_err", "link_lin_vel_err", "link_ang_vel_err"],
        [[f"{v:.9e}" for v in (
            g, b, errs.root_pos_err, errs.root_rot_err, errs.link_pos_err,
            errs.link_rot_err, errs.link_lin_vel_err, errs.link_ang_vel_err,
        )]],
    )
    print(f"MPJPE_global {g:.6f} m   MPJPE_base {b:.6f} m")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupcast",
        description="Grouped ray casting, depth noise, curriculum sampling, and "
                    "tracking metrics for multi-agent simulation.",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--workers", type=int, default=None, help="casting worker count")
    parser.add_argument("--out", help="output directory (env GROUPCAST_OUT overrides)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("bench", help="grouped-vs-naive sweep; writes bench.csv")

    p_render = sub.add_parser("render", help="render raw + processed depth images")
    p_render.add_argument("--scene", help="scene YAML (overrides config)")
    p_render.add_argument("--prefix", default="depth", help="output file prefix")

    p_pipe = sub.add_parser("pipeline", help="apply the noise chain to a directory of PFMs")
    p_pipe.add_argument("--input", required=True, help="directory of .pfm depth images")

    sub.add_parser("curriculum-sim", help="run the adaptive-sampling loop; writes a trace CSV")

    p_metrics = sub.add_parser("metrics", help="MPJPE and mean errors between two clip files")
    p_metrics.add_argument("file_a")
    p_metrics.add_argument("file_b")
    return parser


_COMMANDS = {
    "bench": cmd_bench,
    "render": cmd_render,
    "pipeline": cmd_pipeline,
    "curriculum-sim": cmd_curriculum_sim,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        workers = args.workers if args.workers is not None else cfg.workers
        set_workers(workers)
        return _COMMANDS[args.command](cfg, args)
    except (GroupcastError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
