import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zicount.distributions import (
    DomainError,
    RngStream,
    log_factorial,
    log_pmf_nb,
    log_pmf_poisson,
    log_pmf_zinb,
    log_pmf_zip,
    sample_bernoulli,
    sample_gamma,
    sample_lognormal_standard,
    sample_nb,
    sample_poisson,
)

# frozen from 50-digit mpmath evaluations of the closed forms
POISSON_10_318 = -6.715600605154660626
NB_5_3_25 = -3.2683037083032953884
ZINB_3_15_02_25 = -3.0516769598526180741
ZIP_0_2_05 = -0.56621916951697281297


class TestPoisson:
    def test_zero_count(self):
        assert log_pmf_poisson(0, 1.0) == -1.0

    def test_closed_form(self):
        assert log_pmf_poisson(2, 2.0) == pytest.approx(math.log(2) - 2, abs=1e-15)

    def test_high_precision_oracle(self):
        assert log_pmf_poisson(10, 3.18) == pytest.approx(POISSON_10_318, rel=1e-14)

    def test_live_mpmath(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for y, lam in [(0, 0.3), (7, 12.5), (40, 3.0), (300, 280.0)]:
            ref = y * mp.log(lam) - lam - mp.loggamma(y + 1)
            assert log_pmf_poisson(y, lam) == pytest.approx(float(ref), rel=1e-13)

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, math.nan])
    def test_domain(self, lam):
        with pytest.raises(DomainError):
            log_pmf_poisson(1, lam)

    def test_bad_count(self):
        with pytest.raises(DomainError):
            log_pmf_poisson(-1, 1.0)
        with pytest.raises(DomainError):
            log_pmf_poisson(1.5, 1.0)

    def test_vectorized(self):
        y = np.arange(5)
        out = log_pmf_poisson(y, 2.0)
        assert out.shape == (5,)
        assert out[2] == log_pmf_poisson(2, 2.0)


class TestNegativeBinomial:
    def test_geometric_zero(self):
        assert log_pmf_nb(0, 2.0, 1.0) == pytest.approx(math.log(1 / 3), abs=1e-15)

    def test_poisson_limit(self):
        assert abs(log_pmf_nb(3, 2.0, 1e-10) - log_pmf_poisson(3, 2.0)) < 1e-6

    def test_high_precision_oracle(self):
        assert log_pmf_nb(5, 3.0, 2.5) == pytest.approx(NB_5_3_25, rel=1e-14)

    def test_continuity_near_zero_k(self):
        # the exact gap is about k/2 * ((y - lam)**2 - y), which tops 1e-5
        # only at y = 50 with lam < 0.4; compare against mpmath everywhere
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 50
        k = mp.mpf("1e-8")
        for lam in (0.1, 1.0, 5.0, 20.0):
            lam_m = mp.mpf(lam)
            p = 1 / (1 + k * lam_m)
            for y in range(51):
                exact = (
                    mp.loggamma(y + 1 / k) - mp.loggamma(1 / k) + y * mp.log(1 - p) + mp.log(p) / k
                    - y * mp.log(lam_m) + lam_m
                )
                ours = log_pmf_nb(y, lam, 1e-8) - log_pmf_poisson(y, lam)
                assert abs(ours - float(exact)) < 1e-11
                if float(exact) < 1e-5:
                    assert abs(ours) < 1e-5

    def test_tiny_k_is_stable(self):
        # shape 1/k = 1e20: a naive gammaln difference would lose every digit
        y = np.arange(51)
        diff = np.abs(log_pmf_nb(y, 4.0, 1e-20) - log_pmf_poisson(y, 4.0))
        assert diff.max() < 1e-12

    @pytest.mark.parametrize("lam,k", [(0.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.nan, 1.0)])
    def test_domain(self, lam, k):
        with pytest.raises(DomainError):
            log_pmf_nb(1, lam, k)


class TestZeroInflated:
    def test_zip_reduces_to_poisson(self):
        assert log_pmf_zip(0, 1.0, 0.0) == -1.0

    def test_zip_zero_closed_form(self):
        assert log_pmf_zip(0, 2.0, 0.5) == pytest.approx(ZIP_0_2_05, rel=1e-15)

    def test_zip_positive_composition(self):
        expected = math.log(0.7) + log_pmf_poisson(4, 2.0)
        assert log_pmf_zip(4, 2.0, 0.3) == pytest.approx(expected, rel=1e-15)

    def test_zip_pi_zero_equals_poisson(self):
        y = np.arange(60)
        for lam in (0.05, 2.0, 30.0):
            np.testing.assert_allclose(log_pmf_zip(y, lam, 0.0), log_pmf_poisson(y, lam), atol=1e-12, rtol=0)

    def test_zinb_reduces_to_nb(self):
        assert log_pmf_zinb(0, 2.0, 0.0, 1.0) == pytest.approx(math.log(1 / 3), abs=1e-15)

    def test_zinb_poisson_limit(self):
        assert abs(log_pmf_zinb(0, 2.0, 0.5, 1e-10) - log_pmf_zip(0, 2.0, 0.5)) < 1e-6

    def test_zinb_high_precision_oracle(self):
        assert log_pmf_zinb(3, 1.5, 0.2, 2.5) == pytest.approx(ZINB_3_15_02_25, rel=1e-14)

    def test_large_lambda_zero_branch(self):
        # pi + (1 - pi) e^{-lam} underflows nothing: the result is log(pi)
        assert log_pmf_zip(0, 800.0, 0.25) == pytest.approx(math.log(0.25), rel=1e-15)
        assert math.isfinite(log_pmf_zip(0, 800.0, 0.0))

    @pytest.mark.parametrize("pi", [-0.1, 1.0, 1.5, math.nan])
    def test_pi_domain(self, pi):
        with pytest.raises(DomainError):
            log_pmf_zip(0, 1.0, pi)
        with pytest.raises(DomainError):
            log_pmf_zinb(0, 1.0, pi, 1.0)


def _mass(fn, *args, y_max):
    return math.fsum(np.exp(fn(np.arange(y_max + 1), *args)).tolist())


@pytest.mark.parametrize(
    "fn,args,y_max",
    [
        (log_pmf_poisson, (3.18,), 80),
        (log_pmf_poisson, (40.0,), 200),
        (log_pmf_nb, (3.0, 2.5), 4000),
        (log_pmf_nb, (0.5, 0.1), 100),
        (log_pmf_zip, (2.0, 0.4), 80),
        (log_pmf_zinb, (1.5, 0.2, 2.5), 4000),
    ],
)
def test_masses_sum_to_one(fn, args, y_max):
    assert abs(_mass(fn, *args, y_max=y_max) - 1.0) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    y=st.integers(0, 200),
    lam=st.floats(1e-3, 300.0),
    pi=st.floats(0.0, 0.99),
    k=st.floats(1e-3, 20.0),
)
def test_zinb_matches_direct_mixture(y, lam, pi, k):
    p = 1.0 / (1.0 + k * lam)
    if y == 0:
        direct = math.log(pi + (1 - pi) * p ** (1 / k))
    else:
        direct = math.log1p(-pi) + log_pmf_nb(y, lam, k)
    assert log_pmf_zinb(y, lam, pi, k) == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_log_factorial_table_boundary():
    from scipy.special import gammaln

    y = np.array([0, 1, 255, 256, 257, 10_000])
    np.testing.assert_allclose(log_factorial(y), gammaln(y + 1.0), rtol=1e-15)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(7, 3).generator.random(10)
        b = RngStream(7, 3).generator.random(10)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(7, 3).generator.random(1000)
        b = RngStream(7, 4).generator.random(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            RngStream(-1, 0)


N_DRAWS = 1_000_000


def _within_mc(sample, mean, var, sds=3.0):
    n = sample.size
    assert abs(sample.mean() - mean) < sds * math.sqrt(var / n)


class TestSamplers:
    def test_nb_poisson_limit(self):
        s = sample_nb(RngStream(1, 0), 3.0, 1e-12, size=N_DRAWS)
        assert abs(s.mean() / 3.0 - 1) < 0.02
        assert abs(s.var() / 3.0 - 1) < 0.02

    def test_nb_variance(self):
        s = sample_nb(RngStream(1, 1), 2.0, 1.5, size=N_DRAWS)
        assert abs(s.var() / 8.0 - 1) < 0.02
        _within_mc(s, 2.0, 8.0)

    def test_lognormal_mean(self):
        s = sample_lognormal_standard(RngStream(1, 2), size=N_DRAWS)
        assert abs(s.mean() / math.exp(0.5) - 1) < 0.01

    def test_poisson_and_gamma_moments(self):
        _within_mc(sample_poisson(RngStream(1, 3), 4.2, size=N_DRAWS), 4.2, 4.2)
        _within_mc(sample_gamma(RngStream(1, 4), 2.0, 1.5, size=N_DRAWS), 3.0, 4.5)

    def test_bernoulli(self):
        s = sample_bernoulli(RngStream(1, 5), 0.3, size=N_DRAWS)
        assert set(np.unique(s)) <= {0, 1}
        _within_mc(s, 0.3, 0.21)

    def test_accepts_generator(self):
        g = np.random.default_rng(0)
        assert sample_poisson(g, 1.0, size=3).shape == (3,)

    @pytest.mark.parametrize(
        "call",
        [
            lambda r: sample_poisson(r, -1.0),
            lambda r: sample_gamma(r, 0.0, 1.0),
            lambda r: sample_nb(r, 1.0, 0.0),
            lambda r: sample_bernoulli(r, 1.2),
        ],
    )
    def test_domain(self, call):
        with pytest.raises(DomainError):
            call(RngStream(0, 0))
