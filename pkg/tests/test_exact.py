import itertools
import math

import numpy as np
import pytest

from paip import oracles
from paip.errors import ComplexityRefusal, ConditioningOnNullEvent
from paip.exact import (ExactView, compute_posterior_factor, log_evidence, parameter_posterior,
                        predictive_env_dist, predictive_sensor_dist, sensor_given_env_dist)
from paip.loop import History
from paip.model import HyperParams, ThetaPoint
from paip.prob import normalize


def hist(sensors, actions=()):
    return History(tuple(sensors), tuple(actions))


def all_histories(t, n_s=2, n_a=2):
    for s in itertools.product(range(n_s), repeat=t):
        for a in itertools.product(range(n_a), repeat=t - 1):
            yield hist(s, a)


XI2 = HyperParams.uniform(2, 2, 2)


class TestPosteriorFactor:
    def test_single_state(self):
        xi = HyperParams.uniform(1, 2, 2)
        f = compute_posterior_factor(hist([0, 1, 0], [1, 0]), xi)
        assert len(f.weights) == 1 and f.weights[0] == 1.0
        np.testing.assert_array_equal(f.alpha1[0], [[3.0, 2.0]])

    def test_conjugate_increment(self):
        f = compute_posterior_factor(hist([0, 0], [0]), HyperParams.uniform(1, 2, 1))
        np.testing.assert_array_equal(f.alpha1[0], [[3.0, 1.0]])

    @pytest.mark.parametrize("h", list(all_histories(2)))
    def test_grid_oracle(self, h):
        f = compute_posterior_factor(h, XI2)
        np.testing.assert_allclose(f.weights, oracles.enumerate_posterior_weights(h, XI2), atol=1e-4)

    def test_cap(self):
        with pytest.raises(ComplexityRefusal):
            compute_posterior_factor(hist([0] * 5, [0] * 4), XI2, cap=16)

    def test_weights_normalized(self):
        f = compute_posterior_factor(hist([0, 1, 1, 0], [1, 0, 1]), XI2)
        assert f.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert len(f.weights) == 16


class TestLogEvidence:
    def test_two_zeros(self):
        assert log_evidence(hist([0, 0], [0]), HyperParams.uniform(1, 2, 1)) == pytest.approx(math.log(1 / 3))

    def test_initial_only(self):
        assert log_evidence(hist([1]), HyperParams.uniform(1, 2, 1)) == pytest.approx(math.log(0.5))

    def test_consistent_with_factor(self):
        f = compute_posterior_factor(hist([0, 1, 1], [1, 1]), XI2)
        direct = math.log(np.exp(f.log_joint).sum())
        assert f.log_evidence == pytest.approx(direct, abs=1e-12)

    @pytest.mark.parametrize("h", list(all_histories(3)))
    def test_evidence_ratio_is_one_step_predictive(self, h):
        cp = ExactView(compute_posterior_factor(h, XI2))
        for a in range(2):
            pred = predictive_sensor_dist(cp, [a])
            for s in range(2):
                h2 = History(h.sensors + (s,), h.actions + (a,))
                ratio = math.exp(log_evidence(h2, XI2) - log_evidence(h, XI2))
                assert ratio == pytest.approx(pred[s], abs=1e-10)


class TestSequentialConsistency:
    @pytest.mark.parametrize("h", list(all_histories(2)))
    def test_bayes_update(self, h):
        f = compute_posterior_factor(h, XI2)
        for s, a in itertools.product(range(2), repeat=2):
            f2 = compute_posterior_factor(History(h.sensors + (s,), h.actions + (a,)), XI2)
            # Bayes update of each past path by the one-step Polya predictive
            upd = []
            for i, w in enumerate(f.weights):
                e_prev = f.paths[i, -1]
                a2, a1 = f.alpha2[i], f.alpha1[i]
                for e in range(2):
                    upd.append(w * a2[a, e_prev, e] / a2[a, e_prev].sum() * a1[e, s] / a1[e].sum())
            np.testing.assert_allclose(f2.weights, normalize(upd), atol=1e-10)


class TestPredictives:
    def test_deterministic_transition(self):
        theta = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [1.0, 0.0])
        xi = HyperParams(np.maximum(theta.theta1 * 1e9, 1.0), np.maximum(theta.theta2 * 1e9, 1.0),
                         np.array([1e9, 1.0]))
        cp = ExactView(compute_posterior_factor(hist([0]), xi))
        env = predictive_env_dist(cp, [1, 1, 0])
        assert env[1, 0, 0] == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("h", [hist([0]), hist([1, 0], [1]), hist([0, 0, 1], [0, 1])])
    def test_one_step_grid_oracle(self, h):
        cp = ExactView(compute_posterior_factor(h, XI2))
        for a in range(2):
            ref = oracles.enumerate_future_joint(h, XI2, [a])
            np.testing.assert_allclose(cp.joint([a]), ref, atol=1e-4)
            np.testing.assert_allclose(predictive_env_dist(cp, [a]), ref.sum(axis=0), atol=1e-4)
            np.testing.assert_allclose(predictive_sensor_dist(cp, [a]), ref.sum(axis=1), atol=1e-4)

    def test_two_step_grid_oracle(self):
        h = hist([0, 1], [1])
        cp = ExactView(compute_posterior_factor(h, XI2))
        ref = oracles.enumerate_future_joint(h, XI2, [0, 1])
        np.testing.assert_allclose(cp.joint([0, 1]), ref, atol=1e-4)

    def test_sums_to_one(self):
        cp = ExactView(compute_posterior_factor(hist([0, 1, 1], [1, 0]), XI2))
        for acts in itertools.product(range(2), repeat=3):
            assert predictive_sensor_dist(cp, acts).sum() == pytest.approx(1.0, abs=1e-10)
            assert predictive_env_dist(cp, acts).sum() == pytest.approx(1.0, abs=1e-10)

    def test_marginal_coherence(self):
        cp = ExactView(compute_posterior_factor(hist([0, 1], [0]), XI2))
        full = predictive_sensor_dist(cp, [1, 0])
        one = predictive_sensor_dist(cp, [1])
        np.testing.assert_allclose(full.sum(axis=1), one, atol=1e-12)

    def test_identity_sensor_relabels_env(self):
        xi = HyperParams(np.maximum(np.eye(2) * 1e12, 1e-12), np.ones((2, 2, 2)), np.ones(2))
        cp = ExactView(compute_posterior_factor(hist([0, 1], [1]), xi))
        np.testing.assert_allclose(predictive_sensor_dist(cp, [0, 1]),
                                   predictive_env_dist(cp, [0, 1]), atol=1e-9)

    def test_sensor_given_env_deterministic(self):
        xi = HyperParams(np.maximum(np.eye(2) * 1e12, 1e-12), np.ones((2, 2, 2)), np.ones(2))
        cp = ExactView(compute_posterior_factor(hist([0, 1], [1]), xi))
        d = sensor_given_env_dist(cp, [1, 0], [0, 0])
        assert d[1, 0] == pytest.approx(1.0, abs=1e-9)

    def test_sensor_given_env_action_independent(self):
        # one hidden state: every action block reaches the same path set
        xi = HyperParams.uniform(1, 2, 2)
        cp = ExactView(compute_posterior_factor(hist([0, 1, 1], [0, 1]), xi))
        d0 = sensor_given_env_dist(cp, [0, 0], [0, 1])
        d1 = sensor_given_env_dist(cp, [0, 0], [1, 1])
        np.testing.assert_allclose(d0, d1, atol=1e-10)
        assert d0.sum() == pytest.approx(1.0, abs=1e-12)

    def test_null_event(self):
        theta2 = np.stack([np.eye(2), np.eye(2)])
        xi = HyperParams(np.ones((2, 2)), np.maximum(theta2 * 1e12, 1e-300), np.array([1e12, 1e-300]))
        cp = ExactView(compute_posterior_factor(hist([0]), xi))
        with pytest.raises(ConditioningOnNullEvent):
            sensor_given_env_dist(cp, [1], [0])

    def test_action_relabeling_equivariance(self):
        rng = np.random.default_rng(4)
        xi = HyperParams(rng.uniform(0.5, 3, (2, 2)), rng.uniform(0.5, 3, (2, 2, 2)), rng.uniform(0.5, 3, 2))
        xi_sw = HyperParams(xi.xi1, xi.xi2[::-1], xi.xi3)
        h = hist([0, 1, 1], [0, 1])
        h_sw = hist([0, 1, 1], [1, 0])
        cp = ExactView(compute_posterior_factor(h, xi))
        cp_sw = ExactView(compute_posterior_factor(h_sw, xi_sw))
        np.testing.assert_allclose(cp.sensor_dist([1, 1]), cp_sw.sensor_dist([0, 0]), atol=1e-12)
        np.testing.assert_allclose(cp.env_dist([0, 1]), cp_sw.env_dist([1, 0]), atol=1e-12)


class TestParameterPosterior:
    def test_single_state(self):
        mix = parameter_posterior(compute_posterior_factor(hist([0, 0], [1]), HyperParams.uniform(1, 2, 2)))
        assert len(mix) == 1
        np.testing.assert_array_equal(mix.alpha1[0], [[3.0, 1.0]])

    def test_merges_identical_counts(self):
        # paths (0,1) and (1,0) give the same theta1 counts for sensors (0,0)
        f = compute_posterior_factor(hist([0, 0], [0]), XI2)
        mix = parameter_posterior(f, ["theta1"])
        assert len(mix) < len(f.weights)
        assert mix.weights.sum() == pytest.approx(1.0)

    def test_posterior_mean_grid(self):
        h = hist([0, 1, 1], [1, 0])
        f = compute_posterior_factor(h, XI2)
        mean = parameter_posterior(f, ["theta1"]).mean("theta1")
        # grid oracle: E[theta1[e, 0]] = integral with one extra count
        w = oracles.enumerate_posterior_weights(h, XI2)
        ref = np.zeros((2, 2))
        for i, path in enumerate(itertools.product(range(2), repeat=3)):
            n1 = np.zeros((2, 2), int)
            for e, s in zip(path, h.sensors):
                n1[e, s] += 1
            for e in range(2):
                z = oracles.grid_row_integral(XI2.xi1[e], n1[e])
                ref[e, 0] += w[i] * oracles.grid_row_integral(XI2.xi1[e], n1[e] + [1, 0]) / z
        ref[:, 1] = 1 - ref[:, 0]
        np.testing.assert_allclose(mean, ref, atol=1e-4)


def test_thompson_sample_shapes():
    f = compute_posterior_factor(hist([0, 1], [1]), XI2)
    e, theta = f.sample_hypothesis(np.random.default_rng(0))
    assert e in (0, 1)
    assert theta.theta2.shape == (2, 2, 2)
