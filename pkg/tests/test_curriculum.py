"""Adaptive-sampling table, smoothing, stuck detection, and the sim loop."""

import math

import numpy as np
import pytest
from scipy import stats

from groupcast.curriculum import (
    BinTable,
    SmoothingKernel,
    StuckConfig,
    detect_stuck,
    discretize,
    load_state,
    save_state,
    simulate_curriculum,
)
from groupcast.errors import EmptyClipSetError, OutOfRangeTimeError

from test_motion import make_clip

EPS = 1e-3


class TestDiscretize:
    def test_two_second_clip(self):
        rng = np.random.default_rng(60)
        table = discretize([make_clip(rng, n_frames=21, rate=10.0)], t_bin=1.0)
        assert table.total_bins == 2
        assert table.bin_bounds(0, 0) == (0.0, 1.0)
        assert table.bin_bounds(0, 1) == (1.0, 2.0)

    def test_short_tail_bin(self):
        rng = np.random.default_rng(61)
        table = discretize([make_clip(rng, n_frames=26, rate=10.0)], t_bin=1.0)  # 2.5 s
        assert table.total_bins == 3
        assert table.bin_bounds(0, 2) == (2.0, 2.5)

    def test_mixed_clips_uniform_init(self):
        rng = np.random.default_rng(62)
        clips = [make_clip(rng, n_frames=33, rate=10.0, clip_id="a"),   # 3.2 s
                 make_clip(rng, n_frames=8, rate=10.0, clip_id="b")]    # 0.7 s
        table = discretize(clips, t_bin=1.0)
        assert list(table.n_bins) == [4, 1]
        np.testing.assert_allclose(table.probabilities(), np.full(5, 0.2), atol=1e-12)
        np.testing.assert_array_equal(table.counts, 0)

    def test_empty_rejected(self):
        with pytest.raises(EmptyClipSetError):
            discretize([])
        with pytest.raises(EmptyClipSetError):
            BinTable([], [], 1.0)


class TestRecordFailure:
    def table(self):
        return BinTable(["m"], [3.0], t_bin=1.0)

    def test_time_zero_first_bin(self):
        t = self.table()
        t.record_failure(0, 0.0)
        np.testing.assert_array_equal(t.counts, [1, 0, 0])

    def test_boundary_goes_to_later_bin(self):
        t = self.table()
        t.record_failure(0, 1.0)
        np.testing.assert_array_equal(t.counts, [0, 1, 0])

    def test_clip_end_goes_to_last_bin(self):
        t = self.table()
        t.record_failure(0, 3.0)
        np.testing.assert_array_equal(t.counts, [0, 0, 1])

    def test_out_of_range(self):
        t = self.table()
        with pytest.raises(OutOfRangeTimeError):
            t.record_failure(0, 3.5)
        with pytest.raises(OutOfRangeTimeError):
            t.record_failure(0, -0.1)

    def test_matches_histogram_oracle(self):
        rng = np.random.default_rng(63)
        t = BinTable(["m"], [7.3], t_bin=1.0)
        times = rng.uniform(0.0, 7.3, 100)
        for x in times:
            t.record_failure(0, float(x))
        edges = [0, 1, 2, 3, 4, 5, 6, 7, 7.3]
        want, _ = np.histogram(times, bins=edges)
        np.testing.assert_array_equal(t.counts, want)


class TestUpdateWeights:
    def test_zero_counts_uniform_eps(self):
        t = BinTable(["a", "b"], [3.0, 2.0], t_bin=1.0)
        t.update_weights(SmoothingKernel(), EPS)
        np.testing.assert_array_equal(t.weights, np.full(5, EPS))
        np.testing.assert_allclose(t.probabilities(), 0.2, atol=1e-12)

    def test_closed_form_exponential(self):
        t = BinTable(["m"], [5.0], t_bin=1.0)
        t.record_failure(0, 2.5)  # bin 2
        t.update_weights(SmoothingKernel(decay_bins=1.0), EPS)
        want = np.array([math.exp(-2), math.exp(-1), 1.0, math.exp(-1), math.exp(-2)])
        np.testing.assert_allclose(t.scores, want, atol=1e-12)
        np.testing.assert_allclose(t.weights, want + EPS, atol=1e-12)

    def test_truncation(self):
        t = BinTable(["m"], [9.0], t_bin=1.0)
        t.record_failure(0, 0.5)
        t.update_weights(SmoothingKernel(decay_bins=1.0, truncate=2.0), EPS)
        assert t.scores[0] == pytest.approx(1.0)
        assert t.scores[2] == pytest.approx(math.exp(-2))
        np.testing.assert_array_equal(t.scores[3:], 0.0)

    def test_no_cross_motion_leakage(self):
        t = BinTable(["a", "b"], [4.0, 4.0], t_bin=1.0)
        for x in (0.2, 1.7, 3.9, 2.2):
            t.record_failure(0, x)
        t.update_weights(SmoothingKernel(), EPS)
        np.testing.assert_array_equal(t.weights[4:], EPS)
        assert (t.weights[:4] > EPS).all()

    def test_matches_double_loop_oracle(self):
        from oracles import exp_kernel_scores

        rng = np.random.default_rng(64)
        t = BinTable(["a", "b"], [6.0, 3.5], t_bin=1.0)
        for _ in range(40):
            k = int(rng.integers(0, 2))
            t.record_failure(k, float(rng.uniform(0, t.durations[k])))
        kernel = SmoothingKernel(decay_bins=1.3, truncate=3.0)
        t.update_weights(kernel, EPS)
        for k, (lo, hi) in enumerate(zip(t.offsets[:-1], t.offsets[1:])):
            want = exp_kernel_scores(t.counts[lo:hi].astype(float), 1.3, 3.0)
            np.testing.assert_allclose(t.scores[lo:hi], want, atol=1e-12)

    def test_failure_never_decreases_failed_bin_weight(self):
        rng = np.random.default_rng(65)
        t = BinTable(["a", "b"], [5.0, 2.0], t_bin=1.0)
        kernel = SmoothingKernel()
        t.update_weights(kernel, EPS)
        for _ in range(50):
            k = int(rng.integers(0, 2))
            x = float(rng.uniform(0, t.durations[k]))
            flat = t.offsets[k] + t.bin_of(k, x)
            before = t.weights[flat]
            t.record_failure(k, x)
            t.update_weights(kernel, EPS)
            assert t.weights[flat] >= before - 1e-15

    def test_count_decay_off_by_default_and_optional(self):
        t = BinTable(["m"], [3.0], t_bin=1.0)
        for _ in range(8):
            t.record_failure(0, 0.5)
        t.update_weights(SmoothingKernel(), EPS)
        assert t.counts[0] == 8  # cumulative by default
        t.update_weights(SmoothingKernel(), EPS, count_decay=0.5)
        assert t.counts[0] == 4
        with pytest.raises(ValueError):
            t.update_weights(SmoothingKernel(), EPS, count_decay=0.0)

    def test_huge_eps_approaches_uniform(self):
        rng = np.random.default_rng(66)
        t = BinTable(["a"], [8.0], t_bin=1.0)
        for _ in range(30):
            t.record_failure(0, float(rng.uniform(0, 8.0)))
        t.update_weights(SmoothingKernel(), eps=1e6)
        np.testing.assert_allclose(t.probabilities(), 1.0 / 8.0, atol=1e-4)


class TestSampling:
    def test_single_bin_always(self):
        t = BinTable(["m"], [0.8], t_bin=1.0)
        rng = np.random.default_rng(67)
        for _ in range(10):
            k, ts = t.sample_start(rng)
            assert k == 0
            assert 0.0 <= ts < 0.8

    def test_three_to_one_ratio(self):
        t = BinTable(["m"], [2.0], t_bin=1.0)
        t.weights = np.array([3 * EPS, EPS])
        rng = np.random.default_rng(68)
        picks = np.zeros(2, dtype=int)
        for _ in range(20000):
            _, ts = t.sample_start(rng)
            picks[t.bin_of(0, ts)] += 1
        assert picks[0] / picks.sum() == pytest.approx(0.75, abs=0.01)

    def test_uniform_table_chi_square(self):
        t = BinTable(["a", "b"], [3.0, 2.0], t_bin=1.0)
        rng = np.random.default_rng(69)
        counts = np.zeros(5, dtype=int)
        n = 50000
        for _ in range(n):
            k, ts = t.sample_start(rng)
            counts[t.offsets[k] + t.bin_of(k, ts)] += 1
        expected = np.full(5, n / 5)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < stats.chi2.ppf(0.99, df=4)

    def test_start_time_uniform_inside_bin(self):
        t = BinTable(["m"], [1.0], t_bin=1.0)
        rng = np.random.default_rng(70)
        ts = np.array([t.sample_start(rng)[1] for _ in range(5000)])
        assert ts.min() >= 0.0 and ts.max() < 1.0
        assert abs(ts.mean() - 0.5) < 0.02

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(71)
        t = BinTable(["a", "b", "c"], [4.4, 1.2, 9.9], t_bin=1.0)
        for _ in range(200):
            k = int(rng.integers(0, 3))
            t.record_failure(k, float(rng.uniform(0, t.durations[k])))
            t.update_weights(SmoothingKernel(), EPS)
            assert abs(t.probabilities().sum() - 1.0) <= 1e-9


class TestDetectStuck:
    CFG = StuckConfig(window=1.0, displacement_threshold=0.1, grace=3.0)

    @staticmethod
    def trajectory(speed, stall_at, episode_t, dt=0.02):
        times = np.arange(0.0, episode_t + dt / 2, dt)
        x = np.minimum(times, stall_at) * speed
        return times, np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=1)

    def test_stationary_is_stuck(self):
        times = np.arange(0.0, 1.5, 0.02)
        pos = np.zeros((times.shape[0], 3))
        assert detect_stuck(times, pos, self.CFG, episode_t=1.5)

    def test_moving_is_not_stuck(self):
        times, pos = self.trajectory(speed=1.0, stall_at=100.0, episode_t=2.0)
        assert not detect_stuck(times, pos, self.CFG, episode_t=2.0)

    def test_window_not_filled_is_false(self):
        times = np.arange(0.0, 0.5, 0.02)
        pos = np.zeros((times.shape[0], 3))
        assert not detect_stuck(times, pos, self.CFG, episode_t=0.5)

    def test_past_grace_is_false(self):
        times = np.arange(0.0, 5.0, 0.02)
        pos = np.zeros((times.shape[0], 3))
        assert not detect_stuck(times, pos, self.CFG, episode_t=5.0)

    def test_first_trigger_time_hand_stepped(self):
        # 1 m/s until stalling at t=0.5; window 1 s, threshold 0.02 m.
        # displacement in [t-1, t] is 0.5 - min(t-1, 0.5), dropping below
        # 0.02 strictly after t = 1.48, so the first sampled trigger is 1.50
        cfg = StuckConfig(window=1.0, displacement_threshold=0.02, grace=3.0)
        dt = 0.02
        first = None
        for i in range(1, 120):
            episode_t = round(i * dt, 10)
            times, pos = self.trajectory(speed=1.0, stall_at=0.5, episode_t=episode_t, dt=dt)
            if detect_stuck(times, pos, cfg, episode_t):
                first = episode_t
                break
        assert first is not None
        assert abs(first - 1.5) <= dt


class TestSimulate:
    def test_never_fail_stays_uniform(self):
        t = BinTable(["a", "b"], [3.0, 2.0], t_bin=1.0)
        rng = np.random.default_rng(72)
        trace = simulate_curriculum(t, lambda k, ts, r: None, 200, rng, eps=EPS)
        np.testing.assert_allclose(trace, 0.2, atol=1e-12)

    def test_single_hard_bin_dominates(self):
        t = BinTable(["a", "b"], [3.0, 2.0], t_bin=1.0)
        hard_k, hard_j = 0, 1
        lo, hi = t.bin_bounds(hard_k, hard_j)
        flat = t.offsets[hard_k] + hard_j

        def model(k, ts, r):
            if k != hard_k or ts >= hi:
                return None
            return max(ts, (lo + hi) / 2)

        rng = np.random.default_rng(73)
        trace = simulate_curriculum(t, model, 400, rng, eps=EPS)
        failed = np.flatnonzero(np.abs(np.diff(trace[:, flat])) > 0)
        assert failed.size > 0
        first = failed[0] + 1
        for it in range(first, trace.shape[0]):
            row = trace[it]
            assert row[flat] == row.max()
            assert (row[flat] > np.delete(row, flat)).all()  # strict maximum
        # non-decreasing while it keeps failing
        assert np.all(np.diff(trace[first:, flat]) >= -1e-15)

    def test_two_hard_bins_ranked_by_failure_rate(self):
        t = BinTable(["hi", "lo"], [1.0, 1.0], t_bin=1.0)

        def model(k, ts, r):
            p = 0.9 if k == 0 else 0.3
            return ts if r.random() < p else None

        rng = np.random.default_rng(74)
        trace = simulate_curriculum(t, model, 3000, rng, eps=EPS)
        assert trace[-1, 0] > trace[-1, 1]


def test_state_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(75)
    t = BinTable(["a", "b"], [4.1, 2.0], t_bin=1.0)
    for _ in range(30):
        k = int(rng.integers(0, 2))
        t.record_failure(k, float(rng.uniform(0, t.durations[k])))
    t.update_weights(SmoothingKernel(), EPS)
    path = tmp_path / "curriculum.state"
    save_state(path, t)
    back = load_state(path)
    assert back.motion_ids == t.motion_ids
    np.testing.assert_array_equal(back.counts, t.counts)
    np.testing.assert_allclose(back.scores, t.scores, atol=1e-15)
    np.testing.assert_allclose(back.weights, t.weights, atol=1e-15)


def test_snapshot_isolated():
    t = BinTable(["a"], [2.0], t_bin=1.0)
    snap = t.snapshot()
    t.record_failure(0, 0.5)
    t.update_weights(SmoothingKernel(), EPS)
    np.testing.assert_array_equal(snap.counts, 0)
    np.testing.assert_array_equal(snap.weights, 1.0)
