import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from clusterlens.features import (CONFIGS, FEATURE_NAMES, build_inputs, concat_config,
                                  extract_features, n_time_positions, position_names,
                                  write_feature_csv)


def feats(x):
    return dict(zip(FEATURE_NAMES, extract_features(x)))


def test_roster_is_fixed():
    assert len(FEATURE_NAMES) == 20
    assert FEATURE_NAMES[:3] == ("autocorr_lag1", "centroid", "mean_abs_diff")
    assert FEATURE_NAMES[-5:] == ("max", "min", "mean", "variance", "std")


def test_constant_series():
    f = feats([5, 5, 5, 5])
    for name in ("variance", "entropy", "slope", "sum_abs_diff", "peak_to_peak", "autocorr_lag1"):
        assert f[name] == 0


def test_ramp():
    f = feats([0, 1, 2, 3])
    assert f["slope"] == pytest.approx(1)
    assert f["mean_diff"] == 1 and f["mean"] == 1.5
    assert f["abs_energy"] == 14 and f["area_under_curve"] == 4.5


def test_zigzag_counts():
    f = feats([0, 1, 0, 1, 0])
    # one interior valley (t=2); the endpoints have a single neighbour
    assert f["pos_turning"] == 2 and f["neg_turning"] == 1
    assert f["zero_cross_rate"] == 1.0


def test_too_short():
    with pytest.raises(ValueError):
        extract_features([1, 2])


def independent(x):
    """Reference values from numpy/scipy building blocks."""
    x = np.asarray(x, dtype=float)
    T = x.size
    t = np.arange(T)
    dx = np.diff(x)
    a, b = x[:-1], x[1:]
    ac = 0.0 if np.ptp(a) == 0 or np.ptp(b) == 0 else stats.pearsonr(a, b)[0]
    counts = np.histogram(x, bins=10)[0]
    ent = 0.0 if np.ptp(x) == 0 else stats.entropy(counts / T)
    c = x - x.mean()
    return {
        "autocorr_lag1": ac,
        "centroid": (t * x ** 2).sum() / (x ** 2).sum() if (x ** 2).sum() > 0 else 0.0,
        "mean_abs_diff": np.abs(dx).mean(), "mean_diff": dx.mean(),
        "median_abs_diff": np.median(np.abs(dx)), "median_diff": np.median(dx),
        "sum_abs_diff": np.abs(dx).sum(),
        "zero_cross_rate": np.count_nonzero(np.diff(np.sign(c)[np.sign(c) != 0]) != 0) / (T - 1)
        if not np.any(c == 0) else None,
        "slope": np.polyfit(t, x, 1)[0],
        "abs_energy": (x ** 2).sum(), "area_under_curve": np.trapezoid(x),
        "entropy": ent, "peak_to_peak": np.ptp(x),
        "pos_turning": sum(x[i - 1] < x[i] > x[i + 1] for i in range(1, T - 1)),
        "neg_turning": sum(x[i - 1] > x[i] < x[i + 1] for i in range(1, T - 1)),
        "max": x.max(), "min": x.min(), "mean": x.mean(), "variance": np.var(x),
        "std": np.std(x),
    }


def test_matches_library_building_blocks_on_random_series():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(size=int(rng.integers(3, 60))) * rng.uniform(0.1, 10)
        ours = feats(x)
        for name, ref in independent(x).items():
            if ref is None:
                continue
            assert ours[name] == pytest.approx(ref, rel=1e-9, abs=1e-9), name


series = arrays(float, st.integers(3, 30), elements=st.floats(-100, 100, allow_nan=False))
SHIFT_INVARIANT = ("entropy", "variance", "std", "peak_to_peak", "mean_abs_diff", "mean_diff",
                   "median_abs_diff", "median_diff", "sum_abs_diff", "pos_turning",
                   "neg_turning")


# multiples of 1/8 keep every sum and difference exact
exact_series = arrays(float, st.integers(3, 30),
                      elements=st.integers(-800, 800).map(lambda v: v / 8))


@given(exact_series, st.integers(-50, 50))
@settings(max_examples=200, deadline=None)
def test_shift_invariance(x, c):
    a, b = feats(x), feats(x + c)
    for name in SHIFT_INVARIANT:
        if name == "entropy":
            # bin edges move with the data; only float rounding can differ
            continue
        assert b[name] == pytest.approx(a[name], rel=1e-12, abs=1e-12), name


def test_entropy_shift_invariant_on_integers():
    x = np.array([0, 3, 1, 4, 1, 5, 9, 2, 6], dtype=float)
    assert feats(x)["entropy"] == feats(x + 7)["entropy"]


@given(series, st.sampled_from([-3.0, -0.5, 0.5, 2.0, 4.0]))
@settings(max_examples=200, deadline=None)
def test_scale_covariance(x, a):
    f, g = feats(x), feats(a * x)
    for name in ("sum_abs_diff", "peak_to_peak", "std"):
        assert g[name] == pytest.approx(abs(a) * f[name], rel=1e-9, abs=1e-9)
    assert g["variance"] == pytest.approx(a * a * f["variance"], rel=1e-9, abs=1e-9)
    if a > 0:
        assert g["autocorr_lag1"] == pytest.approx(f["autocorr_lag1"], rel=1e-6, abs=1e-6)


def test_concat_configs():
    x = np.arange(571.0)
    f = extract_features(x)
    assert concat_config(x, f, "with_feats").size == 591
    np.testing.assert_array_equal(concat_config(x, f, "feat_only"), f)
    np.testing.assert_array_equal(concat_config(x, f, "default"), x)
    with pytest.raises(ValueError):
        concat_config(x, f, "raw")


def test_position_names_and_provenance():
    names = position_names(4, "with_feats")
    assert names[:4] == ["t0", "t1", "t2", "t3"] and names[4:] == list(FEATURE_NAMES)
    assert position_names(4, "feat_only") == list(FEATURE_NAMES)
    assert [n_time_positions(4, c) for c in CONFIGS] == [4, 0, 4]


def test_build_inputs_and_csv(tmp_path):
    V = np.random.default_rng(1).normal(size=(3, 10))
    X = build_inputs(V, "with_feats")
    assert X.shape == (3, 30)
    np.testing.assert_array_equal(X[:, :10], V)
    write_feature_csv(["a", "b", "c"], X[:, 10:], tmp_path / "f.csv")
    rows = list(csv.reader((tmp_path / "f.csv").open()))
    assert rows[0] == ["id", *FEATURE_NAMES]
    np.testing.assert_array_equal(np.array(rows[1][1:], dtype=float), X[0, 10:])
