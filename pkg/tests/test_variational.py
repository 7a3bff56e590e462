import itertools

import numpy as np
import pytest

from paip.errors import NonConvergence, ShapeMismatch, UnknownQuery
from paip.exact import ExactView, compute_posterior_factor, log_evidence
from paip.loop import History
from paip.model import HyperParams, ThetaPoint
from paip.variational import (VariationalParams, VariationalView, approx_complete_posterior_query,
                              approx_predictive_sensor_dist, cavi_fit, kl_to_exact_posterior, vfe)


def hist(sensors, actions=()):
    return History(tuple(sensors), tuple(actions))


def random_phi(rng, t, xi):
    return VariationalParams(rng.dirichlet(np.ones(xi.n_states), size=t),
                             rng.uniform(0.3, 4.0, xi.xi1.shape), rng.uniform(0.3, 4.0, xi.xi2.shape),
                             rng.uniform(0.3, 4.0, xi.xi3.shape))


def noisy_xi():
    return HyperParams(np.array([[4.0, 1.0], [1.0, 4.0]]),
                       np.array([[[3.0, 1.0], [1.0, 3.0]], [[1.0, 3.0], [3.0, 1.0]]]),
                       np.array([1.0, 1.0]))


def tv(p, q):
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum()


H3 = hist([0, 1, 1], [1, 0])


class TestVFE:
    def test_single_state_exact(self):
        xi = HyperParams.uniform(1, 2, 2)
        h = hist([0, 1, 1, 0], [0, 1, 1])
        f = compute_posterior_factor(h, xi)
        phi = VariationalParams(np.ones((4, 1)), f.alpha1[0], f.alpha2[0], f.alpha3[0])
        assert vfe(phi, h, xi) == pytest.approx(-log_evidence(h, xi), abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_elbo_identity(self, seed):
        rng = np.random.default_rng(seed)
        xi = noisy_xi()
        phi = random_phi(rng, 3, xi)
        lhs = vfe(phi, H3, xi) + log_evidence(H3, xi)
        assert lhs == pytest.approx(kl_to_exact_posterior(phi, H3, xi), abs=1e-8)
        assert lhs >= -1e-9

    def test_zero_state_belief_finite(self):
        xi = noisy_xi()
        phi = VariationalParams([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], xi.xi1, xi.xi2, xi.xi3)
        assert np.isfinite(vfe(phi, H3, xi))

    def test_shape_mismatch(self):
        xi = noisy_xi()
        with pytest.raises(ShapeMismatch):
            vfe(VariationalParams.initial(2, xi), H3, xi)


class TestCAVI:
    def test_single_state_two_sweeps(self):
        xi = HyperParams.uniform(1, 2, 2)
        h = hist([0, 1, 1, 0], [0, 1, 1])
        phi, rep = cavi_fit(h, xi)
        f = compute_posterior_factor(h, xi)
        assert rep.iterations <= 2
        np.testing.assert_array_equal(phi.phi1, f.alpha1[0])
        np.testing.assert_array_equal(phi.phi2, f.alpha2[0])
        np.testing.assert_array_equal(phi.phi3, f.alpha3[0])

    def test_deterministic_forcing(self):
        th = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [0.5, 0.5])
        xi = HyperParams(np.maximum(th.theta1 * 1e9, 1e-3), np.maximum(th.theta2 * 1e9, 1e-3), np.ones(2))
        h = hist([1, 0, 0], [1, 0])
        phi, _ = cavi_fit(h, xi)
        np.testing.assert_allclose(phi.phi_e, [[0, 1], [1, 0], [1, 0]], atol=1e-6)

    @pytest.mark.parametrize("h", [H3, hist([0, 0, 1], [0, 0]), hist([1, 0, 1], [1, 1])])
    def test_kl_improves(self, h):
        xi = noisy_xi()
        phi, rep = cavi_fit(h, xi)
        init = VariationalParams.initial(3, xi)
        assert kl_to_exact_posterior(phi, h, xi) <= kl_to_exact_posterior(init, h, xi)
        assert np.all(np.diff(rep.trace) <= 1e-9)

    def test_monotone_trace_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            xi = HyperParams(rng.uniform(0.5, 3, (3, 2)), rng.uniform(0.5, 3, (2, 3, 3)), rng.uniform(0.5, 3, 3))
            t = int(rng.integers(1, 6))
            h = hist(rng.integers(0, 2, t), rng.integers(0, 2, t - 1))
            _, rep = cavi_fit(h, xi, restarts=2, seed=1)
            assert np.all(np.diff(rep.trace) <= 1e-9)

    def test_nonconvergence_carries_report(self):
        xi = noisy_xi()
        with pytest.raises(NonConvergence) as info:
            cavi_fit(H3, xi, max_sweeps=1, tol=1e-300)
        assert info.value.report.iterations == 1

    def test_restarts_deterministic(self):
        xi = noisy_xi()
        a, _ = cavi_fit(H3, xi, restarts=3, seed=5)
        b, _ = cavi_fit(H3, xi, restarts=3, seed=5)
        np.testing.assert_array_equal(a.phi_e, b.phi_e)


class TestApproxPredictive:
    def test_deterministic(self):
        th = ThetaPoint(np.eye(2), np.stack([np.eye(2), np.eye(2)[::-1]]), [0.5, 0.5])
        phi = VariationalParams([[1.0, 0.0]], th.theta1 * 1e12 + 1e-12, th.theta2 * 1e12 + 1e-12, [1.0, 1.0])
        d = approx_predictive_sensor_dist(phi, [1, 0])
        assert d[1, 1] == pytest.approx(1.0, abs=1e-9)

    def test_single_state_matches_exact(self):
        xi = HyperParams.uniform(1, 2, 2)
        h = hist([0, 1, 1], [0, 1])
        phi, _ = cavi_fit(h, xi)
        exact = ExactView(compute_posterior_factor(h, xi))
        for acts in itertools.product(range(2), repeat=2):
            np.testing.assert_allclose(approx_predictive_sensor_dist(phi, acts), exact.sensor_dist(acts), atol=1e-10)

    def test_fit_closer_than_init(self):
        xi = noisy_xi()
        phi, _ = cavi_fit(H3, xi)
        exact = ExactView(compute_posterior_factor(H3, xi))
        init = VariationalParams.initial(3, xi)
        for acts in itertools.product(range(2), repeat=2):
            ref = exact.sensor_dist(acts)
            assert tv(approx_predictive_sensor_dist(phi, acts), ref) <= tv(approx_predictive_sensor_dist(init, acts), ref)

    def test_sums_to_one(self):
        phi = random_phi(np.random.default_rng(2), 3, noisy_xi())
        assert approx_predictive_sensor_dist(phi, [0, 1, 1]).sum() == pytest.approx(1.0, abs=1e-10)


class TestQuery:
    def setup_method(self):
        self.phi = random_phi(np.random.default_rng(7), 3, noisy_xi())
        self.view = VariationalView(self.phi)

    def test_e_prev(self):
        np.testing.assert_array_equal(approx_complete_posterior_query(self.view, [0], "e_prev"), self.phi.phi_e[-1])

    def test_theta_mean(self):
        m = approx_complete_posterior_query(self.view, [0], "theta1_mean")
        np.testing.assert_allclose(m, self.phi.phi1 / self.phi.phi1.sum(1, keepdims=True))

    def test_step_joint_direct(self):
        a = 1
        got = approx_complete_posterior_query(self.view, [a], ("step_joint", 0))
        phi = self.phi
        ref = np.zeros((2, 2))
        for e_prev, e, s in itertools.product(range(2), repeat=3):
            ref[s, e] += (phi.phi_e[-1][e_prev] * phi.phi2[a, e_prev, e] / phi.phi2[a, e_prev].sum()
                          * phi.phi1[e, s] / phi.phi1[e].sum())
        np.testing.assert_allclose(got, ref, atol=1e-10)

    def test_unknown(self):
        with pytest.raises(UnknownQuery):
            approx_complete_posterior_query(self.view, [0], "nonsense")

    def test_single_atom_no_info_gain(self):
        assert self.view.info_gain([0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_sampled_atoms_info_gain_positive(self):
        view = VariationalView(self.phi, theta_atoms=8, atom_seed=1)
        assert view.info_gain([0, 1]) > 0
