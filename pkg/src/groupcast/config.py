"""YAML config loading with strict key validation.

One file carries every tunable the CLI uses; unknown keys are rejected so
typos fail loudly instead of silently falling back to defaults. All values
are optional and default to the values below. Reports emit the resolved
config into their headers so results stay attributable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .curriculum import SmoothingKernel, StuckConfig
from .depth import NoiseConfig
from .errors import ConfigError
from .geometry import RigidTransform, transform_from_row
from .metrics import RewardConfig


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _pose_from(d: dict, where: str) -> RigidTransform:
    _check_keys(d, {"translation", "quaternion"}, where)
    trans = d.get("translation", [0.0, 0.0, 0.0])
    quat = d.get("quaternion", [1.0, 0.0, 0.0, 0.0])
    try:
        return transform_from_row(np.array(list(trans) + list(quat), dtype=np.float64))
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


@dataclass(frozen=True)
class CameraConfig:
    width: int = 64
    height: int = 64
    fx: float = 32.0
    fy: float = 32.0
    cx: float = 32.0
    cy: float = 32.0
    near: float = 0.05
    far: float = 5.0
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    group: int = 0


@dataclass(frozen=True)
class CurriculumConfig:
    t_bin: float = 1.0
    kernel: SmoothingKernel = field(default_factory=SmoothingKernel)
    eps: float = 1e-3
    count_decay: float = 1.0  # < 1 shrinks raw counts at each update
    iterations: int = 1000
    stuck: StuckConfig = field(default_factory=StuckConfig)
    motions: tuple[tuple[str, float], ...] = (("clip-a", 3.2), ("clip-b", 0.7))
    failure_kind: str = "never"          # never | fixed_bin | per_bin_prob
    failure_motion: int = 0
    failure_bin: int = 0
    failure_probs: tuple[float, ...] = ()


@dataclass(frozen=True)
class MetricConfig:
    key_links: tuple[str, ...] = ()
    reward: RewardConfig = field(default_factory=RewardConfig)


@dataclass(frozen=True)
class BenchConfig:
    group_counts: tuple[int, ...] = (8, 64, 256, 1024)
    instances_per_group: int = 16
    rays: int = 1024
    repeats: int = 3


@dataclass(frozen=True)
class Config:
    seed: int = 0
    workers: int = 1
    scene: str | None = None
    camera: CameraConfig = field(default_factory=CameraConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    base_dir: Path = field(default_factory=Path.cwd)

    def provenance(self) -> list[str]:
        """Key=value lines for report headers."""
        n = self.noise
        c = self.curriculum
        return [
            f"seed={self.seed}",
            f"workers={self.workers}",
            f"noise.gaussian_sigma={n.gaussian_sigma}",
            f"noise.patch_count_range={list(n.patch_count_range)}",
            f"noise.patch_size_range={list(n.patch_size_range)}",
            f"curriculum.t_bin={c.t_bin}",
            f"curriculum.kernel_decay_bins={c.kernel.decay_bins}",
            f"curriculum.eps={c.eps}",
            f"curriculum.count_decay={c.count_decay}",
            f"curriculum.stuck.window={c.stuck.window}",
            f"curriculum.stuck.threshold={c.stuck.displacement_threshold}",
            f"curriculum.stuck.grace={c.stuck.grace}",
            f"metric.reward.weights={list(self.metric.reward.weights)}",
            f"metric.reward.sigmas={list(self.metric.reward.sigmas)}",
            f"bench.group_counts={list(self.bench.group_counts)}",
            f"bench.instances_per_group={self.bench.instances_per_group}",
            f"bench.rays={self.bench.rays}",
        ]


def _camera_from(d: dict) -> CameraConfig:
    _check_keys(
        d, {"width", "height", "fx", "fy", "cx", "cy", "near", "far", "pose", "group"}, "camera"
    )
    kw: dict = {k: d[k] for k in d if k != "pose"}
    if "pose" in d:
        kw["pose"] = _pose_from(d["pose"], "camera.pose")
    return CameraConfig(**kw)


def _noise_from(d: dict) -> NoiseConfig:
    _check_keys(
        d,
        {"gaussian_sigma", "patch_count_range", "patch_size_range", "hole_fill_value", "seed"},
        "noise",
    )
    kw = dict(d)
    for key in ("patch_count_range", "patch_size_range"):
        if key in kw:
            kw[key] = tuple(int(v) for v in kw[key])
    try:
        return NoiseConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"noise: {e}") from e


def _curriculum_from(d: dict) -> CurriculumConfig:
    _check_keys(
        d,
        {
            "t_bin", "kernel_decay_bins", "kernel_truncate", "eps", "count_decay",
            "iterations", "stuck", "motions", "failure",
        },
        "curriculum",
    )
    kw: dict = {}
    for key in ("t_bin", "eps", "count_decay"):
        if key in d:
            kw[key] = float(d[key])
    if "iterations" in d:
        kw["iterations"] = int(d["iterations"])
    if "kernel_decay_bins" in d or "kernel_truncate" in d:
        kw["kernel"] = SmoothingKernel(
            decay_bins=float(d.get("kernel_decay_bins", 1.0)),
            truncate=float(d.get("kernel_truncate", 5.0)),
        )
    if "stuck" in d:
        _check_keys(d["stuck"], {"window", "displacement_threshold", "grace"}, "curriculum.stuck")
        kw["stuck"] = StuckConfig(**d["stuck"])
    if "motions" in d:
        motions = []
        for i, m in enumerate(d["motions"]):
            _check_keys(m, {"id", "duration"}, f"curriculum.motions[{i}]")
            motions.append((str(m.get("id", f"clip-{i}")), float(m["duration"])))
        kw["motions"] = tuple(motions)
    if "failure" in d:
        f = d["failure"]
        _check_keys(f, {"kind", "motion", "bin", "probs"}, "curriculum.failure")
        kind = f.get("kind", "never")
        if kind not in ("never", "fixed_bin", "per_bin_prob"):
            raise ConfigError(f"curriculum.failure.kind: unknown kind {kind!r}")
        kw["failure_kind"] = kind
        kw["failure_motion"] = int(f.get("motion", 0))
        kw["failure_bin"] = int(f.get("bin", 0))
        kw["failure_probs"] = tuple(float(p) for p in f.get("probs", ()))
    return CurriculumConfig(**kw)


def _metric_from(d: dict) -> MetricConfig:
    _check_keys(d, {"key_links", "weights", "sigmas"}, "metrics")
    kw: dict = {}
    if "key_links" in d:
        kw["key_links"] = tuple(str(s) for s in d["key_links"])
    if "weights" in d or "sigmas" in d:
        try:
            kw["reward"] = RewardConfig(
                weights=tuple(float(w) for w in d.get("weights", (1.0,) * 6)),
                sigmas=tuple(float(s) for s in d.get("sigmas", RewardConfig().sigmas)),
            )
        except ValueError as e:
            raise ConfigError(f"metrics: {e}") from e
    return MetricConfig(**kw)


def _bench_from(d: dict) -> BenchConfig:
    _check_keys(d, {"group_counts", "instances_per_group", "rays", "repeats"}, "bench")
    kw = dict(d)
    if "group_counts" in kw:
        kw["group_counts"] = tuple(int(g) for g in kw["group_counts"])
    return BenchConfig(**kw)


def load_config(path=None) -> Config:
    """Load and validate a config file; None yields all defaults."""
    if path is None:
        return Config()
    p = Path(path)
    with open(p, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    _check_keys(
        doc, {"seed", "workers", "scene", "camera", "noise", "curriculum", "metrics", "bench"},
        str(path),
    )
    return Config(
        seed=int(doc.get("seed", 0)),
        workers=int(doc.get("workers", 1)),
        scene=doc.get("scene"),
        camera=_camera_from(doc.get("camera", {})),
        noise=_noise_from(doc.get("noise", {})),
        curriculum=_curriculum_from(doc.get("curriculum", {})),
        metric=_metric_from(doc.get("metrics", {})),
        bench=_bench_from(doc.get("bench", {})),
        base_dir=p.parent.resolve(),
    )
