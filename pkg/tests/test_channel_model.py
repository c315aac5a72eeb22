import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from rsma_sgf.channel_model import (
    ChannelRealization,
    SystemConfig,
    interior_pair_max_joint_pdf,
    make_rng,
    max_gain_cdf,
    min_max_joint_pdf,
    sample_gains,
    sample_realization,
    top_pair_joint_pdf,
)


def test_derived_thresholds():
    c = SystemConfig(k_users=3, p_b=10.0, p_f=5.0, rate_b=1.0, rate_f=2.0)
    assert c.eps_b == 1.0
    assert c.eps_f == 3.0
    assert c.eta_b == pytest.approx(0.1)
    assert c.eta_f == pytest.approx(0.6)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k_users=0),
        dict(k_users=2.5),
        dict(p_b=0.0),
        dict(p_f=-1.0),
        dict(rate_b=0.0),
        dict(rate_f=float("nan")),
        dict(p_b=float("inf")),
    ],
)
def test_config_rejects_invalid(kwargs):
    base = dict(k_users=2, p_b=1.0, p_f=1.0, rate_b=1.0, rate_f=1.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        SystemConfig(**base)


def test_replace_recomputes_thresholds():
    c = SystemConfig(2, 10.0, 10.0, 1.0, 1.0).replace(p_f=100.0)
    assert c.eta_f == pytest.approx(0.01)


def test_single_user_realization():
    c = SystemConfig(1, 10.0, 10.0, 1.0, 1.0)
    ch = sample_realization(c, make_rng(7))
    assert ch.g_f.shape == (1,)
    assert ch.g_f[0] >= 0


def test_realization_is_deterministic():
    c = SystemConfig(5, 10.0, 10.0, 1.0, 1.0)
    a = sample_realization(c, make_rng(11))
    b = sample_realization(c, make_rng(11))
    assert a.g_b == b.g_b
    np.testing.assert_array_equal(a.g_f, b.g_f)


def test_streams_differ():
    a, _ = sample_gains(2, 10, make_rng(3, 0))
    b, _ = sample_gains(2, 10, make_rng(3, 1))
    assert not np.array_equal(a, b)


def test_gb_draws_do_not_depend_on_k():
    g1, _ = sample_gains(1, 1000, make_rng(5))
    g5, _ = sample_gains(5, 1000, make_rng(5))
    np.testing.assert_array_equal(g1, g5)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_samples_sorted_and_nonnegative(k, seed):
    g_b, g_f = sample_gains(k, 200, make_rng(seed))
    assert np.all(g_b >= 0)
    assert np.all(g_f >= 0)
    assert np.all(np.diff(g_f, axis=1) >= 0)


def test_realization_validation():
    with pytest.raises(ValueError):
        ChannelRealization(1.0, np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        ChannelRealization(-1.0, np.array([1.0]))
    with pytest.raises(ValueError):
        ChannelRealization(1.0, np.array([]))


def test_max_of_four_has_harmonic_mean():
    _, g_f = sample_gains(4, 10**6, make_rng(2024))
    h4 = 1 + 1 / 2 + 1 / 3 + 1 / 4
    assert abs(g_f[:, 3].mean() / h4 - 1) < 0.01


def test_max_cdf_matches_empirical():
    n, k = 10**5, 3
    _, g_f = sample_gains(k, n, make_rng(99))
    for t in (0.1, 0.5, 1.0, 2.0):
        p = max_gain_cdf(t, k)
        emp = np.mean(g_f[:, -1] < t)
        assert abs(emp - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_single_user_ks():
    n = 10**5
    _, g_f = sample_gains(1, n, make_rng(4))
    res = stats.kstest(g_f[:, 0], "expon")
    assert res.statistic < 1.63 / math.sqrt(n)  # asymptotic 1% critical value


def test_min_max_pdf_examples():
    assert min_max_joint_pdf(1.0, 0.5, 3) == 0.0
    assert min_max_joint_pdf(-0.1, 0.5, 3) == 0.0
    assert min_max_joint_pdf(0.0, 50.0, 2) < 1e-20
    with pytest.raises(ValueError):
        min_max_joint_pdf(0.1, 0.2, 1)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_min_max_pdf_normalised(k):
    total, _ = integrate.dblquad(lambda y, x: min_max_joint_pdf(x, y, k), 0, 60, lambda x: x, lambda x: 60)
    assert abs(total - 1) < 1e-8


@pytest.mark.parametrize("k", [2, 4])
def test_top_pair_pdf_normalised(k):
    total, _ = integrate.dblquad(lambda y, x: top_pair_joint_pdf(x, y, k), 0, 60, lambda x: x, lambda x: 60)
    assert abs(total - 1) < 1e-8


def test_top_pair_equals_min_max_for_two_users():
    for x, y in [(0.1, 0.3), (0.5, 2.0), (1.0, 1.0001)]:
        assert top_pair_joint_pdf(x, y, 2) == pytest.approx(min_max_joint_pdf(x, y, 2), rel=1e-12)


def test_top_pair_marginal_of_max():
    # integrating out the runner-up gives the density of the largest gain
    k, y = 4, 1.3
    inner, _ = integrate.quad(lambda x: top_pair_joint_pdf(x, y, k), 0, y)
    assert inner == pytest.approx(k * math.exp(-y) * (1 - math.exp(-y)) ** (k - 1), rel=1e-10)


def test_interior_pdf_examples():
    assert interior_pair_max_joint_pdf(0.1, 0.5, 0.4, 1, 4) == 0.0
    x, y, z = 0.2, 0.7, 1.1
    # K=3, k=1: the (e^-y - e^-z) factor has exponent zero
    assert interior_pair_max_joint_pdf(x, y, z, 1, 3) == pytest.approx(6 * math.exp(-x - y - z), rel=1e-14)
    for bad in (0, 3):
        with pytest.raises(ValueError):
            interior_pair_max_joint_pdf(x, y, z, bad, 4)


@pytest.mark.parametrize("k,K", [(1, 4), (2, 4), (1, 5)])
def test_interior_pdf_normalised(k, K):
    cap = 40.0
    total, _ = integrate.tplquad(
        lambda z, y, x: interior_pair_max_joint_pdf(x, y, z, k, K),
        0, cap, lambda x: x, lambda x: cap, lambda x, y: y, lambda x, y: cap,
        epsabs=1e-10, epsrel=1e-10,
    )  # fmt: skip
    assert abs(total - 1) < 1e-6


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(-1, 10), y=st.floats(-1, 10), z=st.floats(-1, 10), k_users=st.integers(3, 7), k=st.integers(1, 5)
)
def test_pdfs_nonnegative(x, y, z, k_users, k):
    assert min_max_joint_pdf(x, y, k_users) >= 0
    assert top_pair_joint_pdf(x, y, k_users) >= 0
    if k <= k_users - 2:
        assert interior_pair_max_joint_pdf(x, y, z, k, k_users) >= 0
