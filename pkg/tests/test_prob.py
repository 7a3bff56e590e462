import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import digamma as scipy_digamma

from paip import prob
from paip.errors import AbsoluteContinuityViolation, InvalidDistribution


def direct_entropy(p):
    return -sum(x * math.log(x) for x in p if x > 0)


def direct_kl(p, q):
    return sum(x * math.log(x / y) for x, y in zip(p, q) if x > 0)


prob_vectors = st.integers(2, 6).flatmap(
    lambda n: st.lists(st.floats(0.01, 10.0), min_size=n, max_size=n)
).map(lambda w: np.asarray(w) / np.sum(w))


class TestCategorical:
    def test_renormalizes_within_tolerance(self):
        p = prob.categorical([0.5, 0.5 + 5e-13])
        assert abs(p.sum() - 1.0) < 1e-15

    def test_rejects_off_sum(self):
        with pytest.raises(InvalidDistribution):
            prob.categorical([0.5, 0.6])

    def test_rejects_negative_and_empty(self):
        with pytest.raises(InvalidDistribution):
            prob.categorical([1.5, -0.5])
        with pytest.raises(InvalidDistribution):
            prob.categorical([])

    def test_read_only(self):
        p = prob.categorical([0.2, 0.8])
        with pytest.raises(ValueError):
            p[0] = 1.0


class TestEntropy:
    def test_uniform_four(self):
        assert prob.entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-12)

    def test_delta(self):
        assert prob.entropy([0.0, 1.0, 0.0]) == 0.0

    def test_quarter(self):
        assert prob.entropy([0.25, 0.75]) == pytest.approx(direct_entropy([0.25, 0.75]), abs=1e-12)
        assert prob.entropy([0.25, 0.75]) == pytest.approx(0.562335, abs=1e-6)

    @given(prob_vectors)
    def test_bounds(self, p):
        h = prob.entropy(p)
        assert -1e-12 <= h <= math.log(len(p)) + 1e-12


class TestKL:
    def test_identity(self):
        assert prob.kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_delta_vs_uniform(self):
        assert prob.kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(direct_kl([1, 0], [0.5, 0.5]))
        assert prob.kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(0.693147, abs=1e-6)

    def test_support_mismatch(self):
        with pytest.raises(AbsoluteContinuityViolation):
            prob.kl_divergence([1, 0], [0, 1])

    @given(prob_vectors, st.integers(0, 2**32 - 1))
    def test_nonnegative(self, p, seed):
        q = np.random.default_rng(seed).dirichlet(np.ones(len(p)))
        kl = prob.kl_divergence(p, q)
        assert kl >= 0
        assert kl == pytest.approx(direct_kl(p, q), abs=1e-10)


class TestMutualInformation:
    def test_independent(self):
        j = np.outer([0.2, 0.8], [0.6, 0.4])
        assert prob.mutual_information(j) == pytest.approx(0.0, abs=1e-12)

    def test_correlated_pair(self):
        assert prob.mutual_information(np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-12)

    def test_single_row(self):
        assert prob.mutual_information([[0.0, 0.0], [0.3, 0.7]]) == pytest.approx(0.0, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_entropy_identity(self, seed):
        j = np.random.default_rng(seed).dirichlet(np.ones(12)).reshape(3, 4)
        mi = prob.mutual_information(j)
        alt = prob.entropy(j.sum(1)) + prob.entropy(j.sum(0)) - prob.entropy(j)
        assert mi == pytest.approx(alt, abs=1e-10)


class TestPolya:
    def test_single_observation(self):
        assert prob.polya_predictive([1, 1], [1, 0]) == pytest.approx(0.5, abs=1e-15)

    def test_two_observations(self):
        assert prob.polya_predictive([1, 1], [2, 0]) == pytest.approx(0.5 * 2 / 3, abs=1e-15)

    def test_empty(self):
        assert prob.polya_predictive([0.3, 2.0, 5.0], [0, 0, 0]) == 1.0

    @given(st.lists(st.floats(0.1, 20.0), min_size=3, max_size=3),
           st.lists(st.integers(0, 5), min_size=3, max_size=3))
    def test_telescopes(self, alpha, counts):
        a = np.asarray(alpha)
        c = np.asarray(counts)
        for k in np.flatnonzero(c):
            prev = c.copy()
            prev[k] -= 1
            step = (a[k] + prev[k]) / (a.sum() + prev.sum())
            assert prob.polya_predictive(a, c) == pytest.approx(
                prob.polya_predictive(a, prev) * step, rel=1e-12)

    def test_huge_concentration_stable(self):
        # a near-point Dirichlet behaves like the normalized table
        lp = prob.log_polya([1e9 * 0.3, 1e9 * 0.7], [3, 2])
        assert lp == pytest.approx(3 * math.log(0.3) + 2 * math.log(0.7), abs=1e-7)


class TestDigamma:
    def test_against_scipy(self):
        x = np.concatenate([np.geomspace(1e-4, 1e9, 400), np.linspace(0.5, 12, 200)])
        np.testing.assert_allclose(prob.digamma(x), scipy_digamma(x), rtol=1e-12, atol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            prob.digamma([0.0])


class TestExpectedLogProb:
    def test_flat_dirichlet(self):
        # psi(1) - psi(2) = -1
        np.testing.assert_allclose(prob.expected_log_prob([1.0, 1.0]), [-1.0, -1.0], atol=1e-12)

    def test_symmetric(self):
        e = prob.expected_log_prob([3.3, 3.3])
        assert e[0] == e[1]

    def test_large_concentration(self):
        e = prob.expected_log_prob([1e6, 1.0])
        assert e[0] == pytest.approx(math.log(1e6 / (1e6 + 1)), abs=1e-6)

    @given(st.lists(st.floats(0.05, 50.0), min_size=2, max_size=5))
    def test_subnormalized(self, alpha):
        e = prob.expected_log_prob(alpha)
        assert np.all(e < 0)
        assert np.exp(e).sum() <= 1 + 1e-12


class TestDirichletKL:
    def test_zero_for_identical(self):
        assert prob.dirichlet_kl([2.0, 3.0], [2.0, 3.0]) == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(3)
        a, b = np.array([2.0, 5.0, 1.5]), np.array([1.0, 1.0, 1.0])
        x = rng.dirichlet(a, size=200_000)
        from scipy.stats import dirichlet
        mc = np.mean(dirichlet.logpdf(x.T, a) - dirichlet.logpdf(x.T, b))
        assert prob.dirichlet_kl(a, b) == pytest.approx(mc, abs=0.01)


class TestSampling:
    def test_delta(self):
        rng = np.random.default_rng(0)
        assert all(prob.sample_categorical([0, 0, 1.0, 0], rng) == 2 for _ in range(100))

    def test_frequency(self):
        rng = np.random.default_rng(1)
        draws = [prob.sample_categorical([0.5, 0.5], rng) for _ in range(100_000)]
        assert abs(np.mean(draws) - 0.5) < 0.01

    def test_determinism(self):
        a = [prob.sample_categorical([0.2, 0.3, 0.5], prob.make_rng(42)) for _ in range(1)]
        r1, r2 = prob.make_rng(42), prob.make_rng(42)
        s1 = [prob.sample_categorical([0.2, 0.3, 0.5], r1) for _ in range(50)]
        s2 = [prob.sample_categorical([0.2, 0.3, 0.5], r2) for _ in range(50)]
        assert s1 == s2 and s1[0] == a[0]
