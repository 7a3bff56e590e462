import itertools

import numpy as np
import pytest

from paip.errors import IndexOutOfRange
from paip.model import (HorizonRule, HyperParams, ThetaPoint, desired_schedule,
                        joint_model_prob, predictive_factor)


def random_theta(rng, n_e=2, n_s=2, n_a=2):
    return ThetaPoint(rng.dirichlet(np.ones(n_s), size=n_e),
                      rng.dirichlet(np.ones(n_e), size=(n_a, n_e)),
                      rng.dirichlet(np.ones(n_e)))


class TestPredictiveFactor:
    def test_empty(self):
        assert predictive_factor([], [], [], 0, ThetaPoint.uniform(2, 2, 2)) == 1.0

    def test_deterministic(self):
        th = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [1.0, 0.0])
        assert predictive_factor([1, 1], [1, 1], [1, 0], 0, th) == 1.0

    def test_uniform(self):
        assert predictive_factor([0, 1], [1, 0], [0, 0], 0, ThetaPoint.uniform(2, 2, 2)) == 0.0625

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            predictive_factor([2], [0], [0], 0, ThetaPoint.uniform(2, 2, 2))

    @pytest.mark.parametrize("seed", range(5))
    def test_sums_to_one(self, seed):
        rng = np.random.default_rng(seed)
        th = random_theta(rng, 3, 2, 2)
        acts = [1, 0, 1]
        total = sum(predictive_factor(s, e, acts, 2, th)
                    for s in itertools.product(range(2), repeat=3)
                    for e in itertools.product(range(3), repeat=3))
        assert total == pytest.approx(1.0, abs=1e-10)


class TestJoint:
    def test_deltas(self):
        th = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [1.0, 0.0])
        p = joint_model_prob([0, 1], [0, 1], [1], th, [[0.25, 0.75]])
        assert p == pytest.approx(0.75)

    def test_inconsistent(self):
        th = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [1.0, 0.0])
        assert joint_model_prob([0, 0], [0, 1], [1], th, [[0.5, 0.5]]) == 0.0

    def test_uniform_counts_factors(self):
        # q(e0) q(s0|e0) q(a1) q(e1|a1,e0) q(s1|e1): five factors of 1/2
        p = joint_model_prob([0, 1], [1, 0], [1], ThetaPoint.uniform(2, 2, 2), [[0.5, 0.5]])
        assert p == pytest.approx(2.0 ** -5, abs=1e-15)


class TestHorizon:
    def test_fixed(self):
        assert HorizonRule("fixed", 10).horizon_for(3) == 10

    def test_sliding(self):
        assert HorizonRule("sliding", 2).horizon_for(3) == 5
        assert HorizonRule("sliding", 0).horizon_for(7) == 7


class TestHyper:
    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            HyperParams(np.zeros((2, 2)), np.ones((2, 2, 2)), np.ones(2))

    def test_from_theta_mean(self):
        th = random_theta(np.random.default_rng(0))
        xi = HyperParams.from_theta(th)
        np.testing.assert_allclose(xi.xi1 / xi.xi1.sum(-1, keepdims=True), th.theta1, atol=1e-12)


def test_desired_schedule_repeats_last():
    sched = desired_schedule([[1.0, 0.0], [0.2, 0.8]], 2, 3)
    np.testing.assert_allclose(sched, [[1, 0], [0.2, 0.8], [0.2, 0.8]])
