import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from charsurprisal.regression import (
    CVConfig,
    DegenerateDesignError,
    DegenerateLikelihoodError,
    UndefinedR2Error,
    cross_validate,
    delta_llh,
    fit_ols,
    fold_assignments,
    heldout_r2,
    mean_ci,
    permutation_test,
    rng_stream,
)


def test_perfect_line():
    x = np.arange(10.0)
    m = fit_ols(x[:, None], 2 * x + 1, ["x"])
    assert m.coefficients()["x"] == pytest.approx(2.0)
    assert m.intercept == pytest.approx(1.0)


def test_constant_response():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 2))
    m = fit_ols(X, np.full(20, 3.5))
    np.testing.assert_allclose(m.coef, 0.0, atol=1e-12)
    assert m.intercept == pytest.approx(3.5)


def test_constant_column_absorbed():
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.normal(size=30), np.full(30, 4.0)])
    m = fit_ols(X, X[:, 0] * 3 + 1, ["x", "c"])
    assert m.dropped == ("c",) and m.coef[1] == 0.0
    assert m.coef[0] == pytest.approx(3.0)


def test_duplicate_column_is_degenerate():
    rng = np.random.default_rng(2)
    x = rng.normal(size=15)
    with pytest.raises(DegenerateDesignError, match="x"):
        fit_ols(np.column_stack([x, x]), rng.normal(size=15), ["x", "x_again"])


def test_too_few_rows():
    with pytest.raises(DegenerateDesignError):
        fit_ols(np.ones((3, 2)), np.ones(3))


def test_heldout_r2_examples():
    x = np.arange(6.0)[:, None]
    m = fit_ols(x, 2 * x[:, 0])
    assert heldout_r2(m, x, 2 * x[:, 0]) == pytest.approx(1.0)
    y = np.array([1.0, 3.0, 5.0])
    mean_model = fit_ols(np.zeros((5, 1)), np.full(5, 3.0))
    assert heldout_r2(mean_model, np.zeros((3, 1)), y) == pytest.approx(0.0)
    with pytest.raises(UndefinedR2Error):
        heldout_r2(m, x[:3], np.ones(3))
    with pytest.raises(UndefinedR2Error):
        heldout_r2(m, x[:1], np.ones(1))


def test_heldout_r2_monte_carlo():
    rng = np.random.default_rng(3)
    n, sigma = 10_000, 0.5
    x = rng.normal(size=2 * n)
    y = x + rng.normal(scale=sigma, size=2 * n)
    m = fit_ols(x[:n, None], y[:n])
    r2 = heldout_r2(m, x[n:, None], y[n:])
    assert r2 == pytest.approx(1 / (1 + sigma**2), abs=0.01)


def test_delta_llh_identical_models_is_zero():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 2))
    y = X @ [1.0, -1.0] + rng.normal(size=40)
    m = fit_ols(X, y)
    assert delta_llh(m, m, X, X, y) == 0.0


def test_delta_llh_closed_form():
    rng = np.random.default_rng(5)
    n = 20_000
    x = rng.normal(size=2 * n)
    y = x + rng.normal(size=2 * n)
    zeros = np.zeros((2 * n, 1))
    base = fit_ols(zeros[:n], y[:n])
    target = fit_ols(x[:n, None], y[:n])
    d = delta_llh(base, target, zeros[n:], x[n:, None], y[n:])
    # variances 2 vs 1 with matching residuals: the gap is log(2) / 2
    assert d == pytest.approx(0.5 * math.log(2), abs=0.02)


def test_delta_llh_negative_for_overfit_target():
    rng = np.random.default_rng(6)
    y = rng.normal(size=60)
    noise = rng.normal(size=(60, 9))
    ones = np.zeros((60, 1))
    base = fit_ols(ones[:12], y[:12])
    target = fit_ols(noise[:12], y[:12])
    assert delta_llh(base, target, ones[12:], noise[12:], y[12:]) < 0


def test_delta_llh_degenerate():
    x = np.arange(8.0)[:, None]
    m = fit_ols(x, x[:, 0])
    with pytest.raises(DegenerateLikelihoodError):
        delta_llh(m, m, x, x, x[:, 0])
    with pytest.raises(ValueError):
        delta_llh(m, m, x, x, x[:, 0], variance="pooled")


def test_fold_assignments_partition_and_determinism():
    cfg = CVConfig(folds=3, seeds=4)
    a = fold_assignments(10, cfg, seed=11)
    b = fold_assignments(10, cfg, seed=11)
    np.testing.assert_array_equal(a, b)
    for row in a:
        assert sorted(np.bincount(row, minlength=3)) == [3, 3, 4]
    assert not np.array_equal(a, fold_assignments(10, cfg, seed=12))


def test_two_folds_of_two_rows():
    cfg = CVConfig(folds=2, seeds=1)
    a = fold_assignments(4, cfg, seed=0)
    assert sorted(np.bincount(a[0])) == [2, 2]
    X = np.arange(4.0)[:, None]
    with pytest.raises(DegenerateDesignError, match="seed 0, fold 0"):
        cross_validate(X, X, np.array([1.0, 2.0, 0.5, 3.0]), a, cfg)


def test_cv_response_equal_to_surprisal():
    rng = np.random.default_rng(7)
    n = 600
    base = rng.normal(size=(n, 2))
    s = rng.normal(size=n)
    y = s.copy()
    cfg = CVConfig(folds=5, seeds=2)
    res = cross_validate(base, np.column_stack([base, s]), y, fold_assignments(n, cfg, 0), cfg)
    np.testing.assert_allclose(res.r2_target, 1.0, atol=1e-9)
    np.testing.assert_allclose(res.delta_r2, 1.0 - res.r2_baseline, atol=1e-9)


def test_cv_mask_keeps_other_rows_in_place():
    rng = np.random.default_rng(8)
    n = 80
    X = rng.normal(size=(n, 1))
    y = X[:, 0] + rng.normal(size=n)
    cfg = CVConfig(folds=4, seeds=2)
    a = fold_assignments(n, cfg, 0)
    mask = np.ones(n, bool)
    mask[:5] = False
    res = cross_validate(X, X, y, a, cfg, mask=mask)
    np.testing.assert_allclose(res.delta_r2, 0.0, atol=1e-12)


def test_mean_ci():
    m, lo, hi = mean_ci([1.0, 2.0, 3.0, 4.0])
    half = stats.norm.ppf(0.975) * np.std([1, 2, 3, 4], ddof=1) / 2
    assert (m, lo, hi) == pytest.approx((2.5, 2.5 - half, 2.5 + half))
    assert mean_ci([5.0]) == (5.0, 5.0, 5.0)


def test_permutation_all_zero():
    assert permutation_test(np.zeros(100), rng=np.random.default_rng(0)) == 1.0
    assert permutation_test(np.ones(30), np.ones(30), alternative="two-sided", rng=0) == 1.0


def test_permutation_large_shift():
    rng = np.random.default_rng(9)
    b = rng.normal(size=100)
    p = permutation_test(b + 5.0, b, rng=rng)
    assert p <= 0.001
    assert p == pytest.approx(1 / 10_001)


def test_permutation_length_mismatch():
    with pytest.raises(ValueError):
        permutation_test(np.zeros(3), np.zeros(4))


def test_permutation_null_is_uniform():
    rng = np.random.default_rng(10)
    ps = [permutation_test(rng.normal(size=30), n_resamples=999, rng=rng) for _ in range(300)]
    assert stats.kstest(ps, "uniform").pvalue > 0.01


def test_cvconfig_validation():
    for bad in (dict(folds=1), dict(seeds=0), dict(permutations=999), dict(confidence=1.0), dict(llh_variance="x")):
        with pytest.raises(ValueError):
            CVConfig(**bad)


def test_rng_streams_are_independent_and_stable():
    a = rng_stream(1, "folds", 0).integers(0, 2**31, 4)
    assert np.array_equal(a, rng_stream(1, "folds", 0).integers(0, 2**31, 4))
    assert not np.array_equal(a, rng_stream(1, "folds", 1).integers(0, 2**31, 4))
    assert not np.array_equal(a, rng_stream(1, "permutations", 0).integers(0, 2**31, 4))


scales = st.floats(0.01, 100) | st.floats(-100, -0.01)


@settings(max_examples=60, deadline=None)
@given(scales, st.floats(-50, 50), scales, st.floats(-50, 50))
def test_delta_r2_affine_invariance(s1, o1, s2, o2):
    rng = np.random.default_rng(11)
    n = 120
    base = rng.normal(size=(n, 2))
    surp = rng.normal(size=n)
    y = base @ [0.5, -0.2] + 0.7 * surp + rng.normal(size=n)
    cfg = CVConfig(folds=4, seeds=1)
    a = fold_assignments(n, cfg, 3)
    ref = cross_validate(base, np.column_stack([base, surp]), y, a, cfg).delta_r2
    base2 = base * [s1, 1.0] + [o1, 0.0]
    surp2 = surp * s2 + o2
    got = cross_validate(base2, np.column_stack([base2, surp2]), y, a, cfg).delta_r2
    np.testing.assert_allclose(got, ref, atol=1e-9)
