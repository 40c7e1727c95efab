import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import digamma, polygamma
from scipy.stats import kurtosis, skew

from vstoeplitz.dct import transform_sample
from vstoeplitz.simulation import ProcessSpec, sample_gaussian
from vstoeplitz.vst import (
    BinnedSeries,
    DegenerateDataError,
    bin_columns,
    h_inverse,
    h_transform,
    mirror,
    stabilize,
)


def test_bin_divisible():
    b = bin_columns(np.ones((1, 8)), 4)
    np.testing.assert_array_equal(b.q_values, [2, 2, 2, 2])
    assert (b.m, b.discarded, b.T) == (2, 0, 4)


def test_bin_trailing_remainder():
    b = bin_columns(np.ones((1, 9)), 4)
    np.testing.assert_array_equal(b.q_values, [2, 2, 2, 2])
    assert (b.m, b.discarded) == (2, 1)


def test_bin_trailing_drops_last_columns():
    W = np.arange(1.0, 10.0)[None, :]
    np.testing.assert_array_equal(bin_columns(W, 4).q_values, [3, 7, 11, 15])


def test_bin_spread_drops_evenly():
    p, T = 5000, 499
    W = np.arange(p, dtype=float)[None, :]
    b = bin_columns(W, T, remainder="spread")
    assert b.discarded == p - T * (p // T)
    assert b.T == T and b.m == p // T
    # spread policy keeps the band covered: last bin still ends near p
    assert b.q_values[-1] / b.m > p - 2 * (p // T) - b.discarded


def test_bin_counts_rows():
    b = bin_columns(np.ones((3, 10)), 5)
    assert b.m == 6
    np.testing.assert_array_equal(b.q_values, [6] * 5)


def test_bin_sum_at_scenario_scale():
    Y = sample_gaussian(ProcessSpec("poly"), 5000, 1, seed=0)
    W = transform_sample(Y)
    b = bin_columns(W, 500)
    assert b.m == 10
    assert b.q_values.sum() == pytest.approx(W[0, :5000].sum(), rel=1e-12)


def test_bin_rejects_bad_T():
    with pytest.raises(ValueError):
        bin_columns(np.ones((1, 8)), 1)
    with pytest.raises(ValueError):
        bin_columns(np.ones((1, 8)), 9)
    with pytest.raises(ValueError):
        bin_columns(np.ones((1, 9)), 4, remainder="middle")


@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 10_000))
def test_bin_is_linear(p_extra, n, seed):
    rng = np.random.default_rng(seed)
    p = 2 + p_extra
    T = int(rng.integers(2, p + 1))
    W1, W2 = rng.random((n, p)), rng.random((n, p))
    for rem in ("trailing", "spread"):
        lhs = bin_columns(W1 + W2, T, rem).q_values
        rhs = bin_columns(W1, T, rem).q_values + bin_columns(W2, T, rem).q_values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_stabilize_examples():
    b = BinnedSeries(np.full(4, 10.0), m=10, discarded=0, width=10)
    np.testing.assert_allclose(stabilize(b), 0.0, atol=1e-15)
    b = BinnedSeries(np.array([10 * np.exp(np.sqrt(2))]), m=10, discarded=0, width=10)
    np.testing.assert_allclose(stabilize(b), [1.0], rtol=1e-14)


def test_stabilize_degenerate():
    with pytest.raises(DegenerateDataError):
        stabilize(BinnedSeries(np.array([1.0, 0.0]), m=1, discarded=0, width=1))


def test_stabilized_variance_close_to_one_over_m():
    # for white noise Q_k/m ~ chi2_m/m, so var Y* = trigamma(m/2)/2 ~ 1/m
    rng = np.random.default_rng(5)
    W = transform_sample(rng.standard_normal((1, 5000)))
    ystar = stabilize(bin_columns(W, 500))
    assert ystar.var(ddof=1) == pytest.approx(0.1, rel=0.25)


def test_stabilized_moments_at_scenario_scale():
    # Y* is an affine map of log(chi2_m / m): skewness and excess kurtosis
    # are polygamma(2)/polygamma(1)^1.5 and polygamma(3)/polygamma(1)^2 at m/2
    m = 10
    tri = polygamma(1, m / 2)
    sk_true = polygamma(2, m / 2) / tri**1.5
    ku_true = polygamma(3, m / 2) / tri**2
    T = 500
    sk_se, ku_se = np.sqrt(6 / T), np.sqrt(24 / T)
    sk, ku = [], []
    for seed in range(20):
        Y = sample_gaussian(ProcessSpec("poly"), 5000, 1, seed=seed)
        ystar = stabilize(bin_columns(transform_sample(Y), T))
        r = ystar - ystar.mean()
        sk.append(skew(r))
        ku.append(kurtosis(r))
    assert sk_true == pytest.approx(-0.469, abs=2e-3)
    assert abs(np.mean(sk) - sk_true) < 3 * sk_se / np.sqrt(20)
    assert abs(np.mean(ku) - ku_true) < 3 * ku_se / np.sqrt(20)
    assert np.all(np.abs(np.array(sk) - sk_true) < 4 * sk_se)


def test_mirror_examples():
    d = mirror([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(d.z, [1, 2, 3, 2])
    np.testing.assert_allclose(d.x, [0, 0.25, 0.5, 0.75])
    d = mirror([1.0, 2.0])
    np.testing.assert_array_equal(d.z, [1, 2])
    np.testing.assert_allclose(d.x, [0, 0.5])
    np.testing.assert_array_equal(mirror(np.full(6, 4.0)).z, np.full(10, 4.0))
    with pytest.raises(ValueError):
        mirror([1.0])


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=50))
def test_mirror_symmetry(y):
    z = mirror(y).z
    N = z.size
    assert N == 2 * len(y) - 2
    for k in range(1, N):
        assert z[k] == z[N - k]


def test_digamma_half_against_mpmath():
    ref = float(-mpmath.euler - 2 * mpmath.log(2))
    assert ref == pytest.approx(-1.9635100260, abs=1e-10)
    assert digamma(0.5) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("x", [0.5, 1.0, 3.5, 5.0, 50.0, 5000.0])
def test_digamma_against_mpmath(x):
    assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), abs=1e-12)


def test_h_round_trip_example():
    assert h_inverse(h_transform(1.44, 10), 10) == pytest.approx(1.44, rel=1e-12)


@pytest.mark.parametrize("m", [1, 10, 100])
def test_h_fixed_point(m):
    y = m / 2 * np.exp(-digamma(m / 2))
    assert h_transform(y, m) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("m", [1, 10, 10_000])
def test_h_round_trip_range(m):
    y = np.logspace(-8, 8, 400)
    rel = np.abs(h_inverse(h_transform(y, m), m) / y - 1)
    assert rel.max() < 1e-10


def test_h_transform_domain():
    with pytest.raises(ValueError):
        h_transform(0.0, 5)
    with pytest.raises(ValueError):
        h_transform(np.array([1.0, -1.0]), 5)
