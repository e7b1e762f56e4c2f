"""Failure-binned adaptive start-state sampling and stuck detection.

Each reference motion is discretized into temporal bins of at most
``t_bin`` seconds (the last bin may be shorter). Rollout failures increment
the failed bin's raw count; counts are smoothed within each motion by a
kernel over bin distance, and sampling weights are the smoothed scores plus
an ``eps`` floor so every bin keeps nonzero probability. Episode starts are
then drawn bin-first, uniform inside the bin.

A BinTable is mutated only by its owner (record/update are not
synchronized); concurrent samplers should draw from a ``snapshot()`` taken
after each update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyClipSetError, OutOfRangeTimeError
from .motion import MotionClip

DEFAULT_T_BIN = 1.0

# tolerance for float fuzz when mapping times to bins
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class SmoothingKernel:
    """Distance kernel over bin indices; exponential decay, truncated.

    weight(j, i) = exp(-|j - i| / decay_bins), zero beyond
    truncate * decay_bins bins. Maximal at j == i.
    """

    decay_bins: float = 1.0
    truncate: float = 5.0
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind != "exponential":
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.decay_bins <= 0.0 or self.truncate <= 0.0:
            raise ValueError("decay_bins and truncate must be positive")

    def weight(self, j: int, i: int) -> float:
        d = abs(j - i)
        if d > self.truncate * self.decay_bins:
            return 0.0
        return math.exp(-d / self.decay_bins)

    def matrix(self, n: int) -> np.ndarray:
        """(n, n) array K[j, i]."""
        idx = np.arange(n)
        d = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
        k = np.exp(-d / self.decay_bins)
        k[d > self.truncate * self.decay_bins] = 0.0
        return k


@dataclass(frozen=True)
class StuckConfig:
    """Early-timeout parameters.

    An episode younger than ``grace`` seconds is truncated when the root
    has moved less than ``displacement_threshold`` meters over the trailing
    ``window`` seconds. Past the grace period the detector never fires.
    """

    window: float = 1.0
    displacement_threshold: float = 0.1
    grace: float = 3.0

    def __post_init__(self):
        if self.window <= 0.0 or self.displacement_threshold <= 0.0:
            raise ValueError("window and displacement_threshold must be positive")


class BinTable:
    """Per-motion temporal bins with failure counts and sampling weights.

    State arrays are flat over all motions; ``offsets[k]`` locates motion
    k's bins. ``counts`` are raw failure tallies (cumulative unless
    ``decay`` is enabled), ``scores`` the smoothed copy, ``weights`` the
    sampling weights (initially uniform 1.0).
    """

    def __init__(self, motion_ids: Sequence[str], durations: Sequence[float],
                 t_bin: float = DEFAULT_T_BIN):
        if t_bin <= 0.0:
            raise ValueError("t_bin must be positive")
        if len(motion_ids) == 0:
            raise EmptyClipSetError("need at least one motion")
        if len(motion_ids) != len(durations):
            raise ValueError("motion_ids and durations must have equal length")
        self.motion_ids = tuple(str(m) for m in motion_ids)
        self.durations = np.array(durations, dtype=np.float64)
        if np.any(self.durations <= 0.0):
            raise ValueError("durations must be positive")
        self.t_bin = float(t_bin)
        self.n_bins = np.array(
            [max(1, int(math.ceil(d / self.t_bin - _TIME_EPS))) for d in self.durations],
            dtype=np.int64,
        )
        self.offsets = np.concatenate([[0], np.cumsum(self.n_bins)])
        total = int(self.offsets[-1])
        self.counts = np.zeros(total, dtype=np.int64)
        self.scores = np.zeros(total, dtype=np.float64)
        self.weights = np.ones(total, dtype=np.float64)

    @property
    def n_motions(self) -> int:
        return len(self.motion_ids)

    @property
    def total_bins(self) -> int:
        return int(self.offsets[-1])

    def bin_bounds(self, k: int, j: int) -> tuple[float, float]:
        """[lo, hi) interval of motion k's bin j; hi clipped to the duration."""
        lo = j * self.t_bin
        hi = min((j + 1) * self.t_bin, float(self.durations[k]))
        return lo, hi

    def bin_of(self, k: int, t: float) -> int:
        """Local bin index for time t in motion k (half-open bins).

        A boundary time belongs to the later bin; the exact clip end
        belongs to the last bin. Raises OutOfRangeTimeError outside
        [0, duration].
        """
        dur = float(self.durations[k])
        if t < -_TIME_EPS or t > dur + _TIME_EPS:
            raise OutOfRangeTimeError(f"t={t} outside clip {k} duration {dur}")
        j = int(t / self.t_bin)
        return min(j, int(self.n_bins[k]) - 1)

    def record_failure(self, k: int, t_fail: float) -> None:
        """Increment the raw count of the bin containing ``t_fail``."""
        if k < 0 or k >= self.n_motions:
            raise IndexError(f"motion index {k} out of range")
        self.counts[self.offsets[k] + self.bin_of(k, t_fail)] += 1

    def update_weights(self, kernel: SmoothingKernel, eps: float,
                       count_decay: float = 1.0) -> None:
        """Refresh smoothed scores and weights from the raw counts.

        Smoothing is motion-local: scores of motion k depend only on counts
        of motion k. Weights become score + eps. ``count_decay`` < 1
        optionally shrinks raw counts first (off by default; counts are
        cumulative).
        """
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        if not 0.0 < count_decay <= 1.0:
            raise ValueError("count_decay must lie in (0, 1]")
        if count_decay < 1.0:
            self.counts = np.floor(self.counts * count_decay).astype(np.int64)
        for k in range(self.n_motions):
            lo, hi = self.offsets[k], self.offsets[k + 1]
            kmat = kernel.matrix(int(hi - lo))
            self.scores[lo:hi] = kmat @ self.counts[lo:hi].astype(np.float64)
        self.weights = self.scores + eps

    def probabilities(self) -> np.ndarray:
        """Normalized sampling distribution over all bins of all motions."""
        return self.weights / self.weights.sum()

    def sample_start(self, rng: np.random.Generator) -> tuple[int, float]:
        """Draw (motion index, start time): bin by weight, time uniform in bin."""
        p = self.probabilities()
        flat = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        flat = min(flat, self.total_bins - 1)
        k = int(np.searchsorted(self.offsets, flat, side="right") - 1)
        j = flat - int(self.offsets[k])
        lo, hi = self.bin_bounds(k, j)
        return k, lo + rng.random() * (hi - lo)

    def snapshot(self) -> "BinTable":
        """Independent copy for concurrent read-only sampling."""
        out = BinTable(self.motion_ids, self.durations, self.t_bin)
        out.counts = self.counts.copy()
        out.scores = self.scores.copy()
        out.weights = self.weights.copy()
        return out


def discretize(clips: Sequence[MotionClip], t_bin: float = DEFAULT_T_BIN) -> BinTable:
    """Build the initial table (uniform weights, zero counts) from clips."""
    if len(clips) == 0:
        raise EmptyClipSetError("need at least one motion clip")
    return BinTable([c.id for c in clips], [c.duration for c in clips], t_bin)


def detect_stuck(times, positions, cfg: StuckConfig, episode_t: float) -> bool:
    """True when the root barely moved over the trailing window.

    ``times``/``positions`` are the episode's root trajectory so far
    (time-ordered). Displacement is measured from the first sample inside
    ``[episode_t - window, episode_t]``. Returns False when the episode is
    past the grace period or the window is not yet filled (insufficient
    history).
    """
    times = np.asarray(times, dtype=np.float64)
    pos = np.asarray(positions, dtype=np.float64)
    if times.ndim != 1 or pos.shape != (times.shape[0], 3):
        raise ValueError("need times (N,) and positions (N, 3)")
    if times.shape[0] and np.any(np.diff(times) < 0.0):
        raise ValueError("times must be non-decreasing")
    if episode_t > cfg.grace:
        return False
    t_lo = episode_t - cfg.window
    if times.shape[0] == 0 or times[0] > t_lo + _TIME_EPS:
        return False  # window not yet filled
    in_win = (times >= t_lo - _TIME_EPS) & (times <= episode_t + _TIME_EPS)
    pts = pos[in_win]
    if pts.shape[0] == 0:
        return False
    disp = float(np.linalg.norm(pts - pts[0], axis=1).max())
    return disp < cfg.displacement_threshold


FailureModel = Callable[[int, float, np.random.Generator], Optional[float]]


def simulate_curriculum(
    table: BinTable,
    failure_model: FailureModel,
    iterations: int,
    rng: np.random.Generator,
    kernel: SmoothingKernel | None = None,
    eps: float = 1e-3,
    count_decay: float = 1.0,
) -> np.ndarray:
    """Run the sample/rollout/update loop with a synthetic failure model.

    ``failure_model(k, t_start, rng)`` stands in for a policy rollout and
    returns the failure time or None for success. Returns the (iterations,
    total_bins) trace of the sampling distribution after each iteration.
    """
    if kernel is None:
        kernel = SmoothingKernel()
    trace = np.empty((iterations, table.total_bins), dtype=np.float64)
    for it in range(iterations):
        k, t_start = table.sample_start(rng)
        t_fail = failure_model(k, t_start, rng)
        if t_fail is not None:
            table.record_failure(k, t_fail)
            table.update_weights(kernel, eps, count_decay)
        trace[it] = table.probabilities()
    return trace


def save_state(path, table: BinTable) -> None:
    """Checkpoint counts/scores/weights as structured text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"t_bin {table.t_bin:.17g}\n")
        fh.write(f"motions {table.n_motions}\n")
        for k, mid in enumerate(table.motion_ids):
            fh.write(f"motion {mid} {table.durations[k]:.17g} {int(table.n_bins[k])}\n")
        fh.write("bins\n")
        for k in range(table.n_motions):
            for j in range(int(table.n_bins[k])):
                f = table.offsets[k] + j
                fh.write(
                    f"{k} {j} {int(table.counts[f])} "
                    f"{table.scores[f]:.17g} {table.weights[f]:.17g}\n"
                )


def load_state(path) -> BinTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.strip().startswith("#")]
    t_bin = float(lines[0].split()[1])
    n_motions = int(lines[1].split()[1])
    ids, durations, n_bins = [], [], []
    for ln in lines[2 : 2 + n_motions]:
        _, mid, dur, nb = ln.split()
        ids.append(mid)
        durations.append(float(dur))
        n_bins.append(int(nb))
    if lines[2 + n_motions] != "bins":
        raise ValueError(f"{path}: expected 'bins' separator")
    table = BinTable(ids, durations, t_bin)
    if list(table.n_bins) != n_bins:
        raise ValueError(f"{path}: bin counts disagree with durations")
    for ln in lines[3 + n_motions :]:
        k, j, cnt, score, weight = ln.split()
        f = table.offsets[int(k)] + int(j)
        table.counts[f] = int(cnt)
        table.scores[f] = float(score)
        table.weights[f] = float(weight)
    return table
