"""Window feature extraction against brute-force oracles."""

import math

import numpy as np
import pytest

from summertime.dataset import Bout
from summertime.features import (
    PERCENTILE_FRACTIONS,
    STAT_NAMES,
    feature_names,
    featurize_bout,
    lag1_autocorrelation,
    percentile_points,
    percentile_rank,
    segment,
    stack_features,
    window_features,
)


def sort_oracle_percentile(values, fraction):
    """Nearest-rank percentile via an explicit sorted copy."""
    ordered = sorted(values)
    rank = math.ceil(fraction * len(ordered))
    rank = min(max(rank, 1), len(ordered))
    return ordered[rank - 1]


def double_loop_ac1(values):
    """Lag-1 autocorrelation with explicit loops, no vectorization."""
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    denom = 0.0
    for v in values:
        denom += (v - mean) ** 2
    if denom == 0.0:
        return 0.0
    num = 0.0
    for i in range(n - 1):
        num += (values[i] - mean) * (values[i + 1] - mean)
    return num / denom


def test_percentile_ranks_for_n12_are_the_published_points():
    ranks = [percentile_rank(q, 12) for q in PERCENTILE_FRACTIONS]
    # 1-based sample ranks 2, 3, 6, 9, 11
    assert [r + 1 for r in ranks] == [2, 3, 6, 9, 11]


def test_percentile_rank_clamps_to_valid_range():
    assert percentile_rank(0.0001, 5) == 0
    assert percentile_rank(0.9999, 5) == 4
    with pytest.raises(ValueError, match="fraction"):
        percentile_rank(1.0, 7)


def test_percentile_matches_sort_oracle_on_random_windows():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        window = rng.normal(50.0, 30.0, size=12)
        points = percentile_points(window, PERCENTILE_FRACTIONS)
        for q, got in zip(PERCENTILE_FRACTIONS, points):
            want = sort_oracle_percentile(window.tolist(), q)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_ac1_matches_double_loop_oracle_on_random_windows():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        window = rng.normal(0.0, 5.0, size=12)
        got = lag1_autocorrelation(window)
        want = double_loop_ac1(window.tolist())
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_ac1_closed_forms():
    assert lag1_autocorrelation(np.array([3.0, 3.0, 3.0, 3.0])) == 0.0
    assert lag1_autocorrelation(np.array([5.0])) == 0.0
    # alternating +1/-1: numerator pairs all -1, denominator n
    alt = np.array([1.0, -1.0] * 6)
    assert lag1_autocorrelation(alt) == pytest.approx(-11.0 / 12.0, rel=1e-12)


def test_segment_drops_the_tail():
    signal = np.arange(30, dtype=float).reshape(30, 1)
    windows = segment(signal, 12)
    assert windows.shape == (2, 12, 1)
    assert windows[0, 0, 0] == 0.0
    assert windows[1, 11, 0] == 23.0


def test_segment_rejects_short_bouts():
    with pytest.raises(ValueError, match="shorter than one window"):
        segment(np.zeros((5, 2)), 12)


def test_window_features_layout_is_axis_major():
    rng = np.random.default_rng(13)
    window = rng.normal(size=(12, 3))
    feats = window_features(window)
    assert feats.shape == (18,)
    for axis in range(3):
        col = window[:, axis]
        expected = np.concatenate(
            [percentile_points(col, PERCENTILE_FRACTIONS), [lag1_autocorrelation(col)]]
        )
        np.testing.assert_allclose(feats[axis * 6:(axis + 1) * 6], expected, rtol=1e-12)


def test_feature_names_align_with_layout():
    names = feature_names(2)
    assert len(names) == 12
    assert names[0] == "axis1_p10"
    assert names[5] == "axis1_ac1"
    assert names[6] == "axis2_p10"
    assert [n.split("_")[1] for n in names[:6]] == list(STAT_NAMES)


def test_featurize_bout_truncates_targets_to_window_count():
    signal = np.arange(40, dtype=float).reshape(40, 1)
    bout = Bout("b1", "s1", "Walk", signal, targets=np.array([2.0, 3.0, 4.0]))
    feats = featurize_bout(bout, 12)
    assert feats.window_count == 3
    np.testing.assert_array_equal(feats.targets, [2.0, 3.0, 4.0])
    # without targets the field stays None
    bare = Bout("b2", "s1", "Walk", signal)
    assert featurize_bout(bare, 12).targets is None


def test_stack_features_concatenates_in_order():
    rng = np.random.default_rng(14)
    bouts = [
        Bout(f"b{i}", "s1", "Run", rng.normal(size=(24, 2)))
        for i in range(3)
    ]
    feats = [featurize_bout(b, 12) for b in bouts]
    stacked = stack_features(feats)
    assert stacked.shape == (6, 12)
    np.testing.assert_array_equal(stacked[:2], feats[0].matrix)
    np.testing.assert_array_equal(stacked[4:], feats[2].matrix)
