"""Mean-field variational approximation of the posterior factor.

The family is r(e_{0:t-1}, theta) = prod_tau phi_tau(e_tau) * prod_i Dir(theta^i; phi^i).
Only the posterior factor is approximated; predictives through the future
block stay exact given the variational factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, ShapeMismatch, UnknownQuery
from .exact import compute_posterior_factor
from .loop import History
from .model import HyperParams, ThetaPoint
from .predictive import DEFAULT_CAP, Components, MixtureView
from .prob import (dirichlet_kl, expected_log_prob, normalize, normalize_log, sample_categorical,
                   xlogy)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 500


@dataclass(frozen=True)
class VariationalParams:
    phi_e: np.ndarray     # (t, E)
    phi1: np.ndarray      # (E, S)
    phi2: np.ndarray      # (A, E, E)
    phi3: np.ndarray      # (E,)

    def __post_init__(self):
        for name in ("phi_e", "phi1", "phi2", "phi3"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.phi_e.ndim != 2:
            raise ShapeMismatch("phi_e must be (t, |E|)")
        if np.any(np.abs(self.phi_e.sum(axis=1) - 1) > 1e-9) or np.any(self.phi_e < 0):
            raise ShapeMismatch("each phi_e row must be a distribution")
        for name in ("phi1", "phi2", "phi3"):
            if np.any(getattr(self, name) <= 0):
                raise ShapeMismatch(f"{name} concentrations must be positive")

    @property
    def t(self) -> int:
        return self.phi_e.shape[0]

    @property
    def n_states(self) -> int:
        return self.phi3.shape[0]

    @classmethod
    def initial(cls, t: int, xi: HyperParams, rng=None) -> "VariationalParams":
        n_e = xi.n_states
        if rng is None:
            phi_e = np.full((t, n_e), 1.0 / n_e)
        else:
            phi_e = rng.dirichlet(np.ones(n_e), size=t)
        return cls(phi_e, xi.xi1.copy(), xi.xi2.copy(), xi.xi3.copy())

    def sample_hypothesis(self, rng):
        """Draw e_{t-1} from phi_e and parameters from the Dirichlet factors."""
        e_prev = sample_categorical(self.phi_e[-1], rng)

        def draw(alpha):
            flat = alpha.reshape(-1, alpha.shape[-1])
            rows = [normalize(rng.dirichlet(r)) if r.max() < 1e8 else normalize(r) for r in flat]
            return np.asarray(rows).reshape(alpha.shape)

        return e_prev, ThetaPoint(draw(self.phi1), draw(self.phi2), draw(self.phi3))


def _check(phi: VariationalParams, h: History, xi: HyperParams):
    h.check(xi.n_sensors, xi.n_actions)
    if phi.t != h.t:
        raise ShapeMismatch(f"phi covers {phi.t} steps, history has {h.t}")
    if (phi.phi1.shape != xi.xi1.shape or phi.phi2.shape != xi.xi2.shape
            or phi.phi3.shape != xi.xi3.shape or phi.phi_e.shape[1] != xi.n_states):
        raise ShapeMismatch("phi blocks do not match the hyperparameter shapes")


def expected_counts(phi_e: np.ndarray, h: History, n_sensors: int, n_actions: int):
    n_e = phi_e.shape[1]
    c1 = np.zeros((n_e, n_sensors))
    for tau, s in enumerate(h.sensors):
        c1[:, s] += phi_e[tau]
    c2 = np.zeros((n_actions, n_e, n_e))
    for tau, a in enumerate(h.actions, start=1):
        c2[a] += np.outer(phi_e[tau - 1], phi_e[tau])
    return c1, c2, phi_e[0].copy()


def expected_log_likelihood(phi: VariationalParams, h: History) -> float:
    """E_r[log q(s, e | a, theta)] in closed form."""
    el1 = expected_log_prob(phi.phi1)
    el2 = expected_log_prob(phi.phi2)
    el3 = expected_log_prob(phi.phi3)
    c1, c2, c3 = expected_counts(phi.phi_e, h, phi.phi1.shape[1], phi.phi2.shape[0])
    return float((c1 * el1).sum() + (c2 * el2).sum() + (c3 * el3).sum())


def vfe(phi: VariationalParams, h: History, xi: HyperParams) -> float:
    """Variational free energy E_r[log r - log q(s, e, theta | a, xi)] in nats."""
    _check(phi, h, xi)
    neg_entropy_e = float(xlogy(phi.phi_e, phi.phi_e).sum())
    kl_theta = float(dirichlet_kl(phi.phi1, xi.xi1).sum() + dirichlet_kl(phi.phi2, xi.xi2).sum()
                     + dirichlet_kl(phi.phi3, xi.xi3))
    return neg_entropy_e + kl_theta - expected_log_likelihood(phi, h)


def kl_to_exact_posterior(phi: VariationalParams, h: History, xi: HyperParams,
                          cap: float = DEFAULT_CAP) -> float:
    """KL[r(phi) || exact posterior factor] by enumerating past state paths.

    KL = sum_path r(path) [log r(path) - log p(path) + KL(Dir(phi) || Dir(xi + n_path))].
    """
    _check(phi, h, xi)
    f = compute_posterior_factor(h, xi, cap)
    t = h.t
    r_path = np.prod(phi.phi_e[np.arange(t)[None, :], f.paths], axis=1)
    log_p = f.log_joint - f.log_evidence
    total = 0.0
    for i in np.flatnonzero(r_path > 0):
        kl_theta = (dirichlet_kl(phi.phi1, f.alpha1[i]).sum() + dirichlet_kl(phi.phi2, f.alpha2[i]).sum()
                    + dirichlet_kl(phi.phi3, f.alpha3[i]))
        total += r_path[i] * (np.log(r_path[i]) - log_p[i] + kl_theta)
    return float(total)


@dataclass
class FitReport:
    vfe: float
    iterations: int
    last_delta: float
    converged: bool
    trace: list = field(default_factory=list)
    params: VariationalParams = None


def _update_states(phi_e, h: History, el1, el2, el3):
    t, n_e = phi_e.shape
    phi_e = phi_e.copy()
    for tau in range(t):
        logit = el1[:, h.sensors[tau]].copy()
        if tau == 0:
            logit += el3
        else:
            logit += phi_e[tau - 1] @ el2[h.actions[tau - 1]]
        if tau + 1 < t:
            logit += el2[h.actions[tau]] @ phi_e[tau + 1]
        phi_e[tau], _ = normalize_log(logit)
    return phi_e


def cavi_sweep(phi: VariationalParams, h: History, xi: HyperParams) -> VariationalParams:
    """One coordinate-ascent sweep: states in time order, then phi3, phi1, phi2."""
    phi_e = _update_states(phi.phi_e, h, expected_log_prob(phi.phi1),
                           expected_log_prob(phi.phi2), expected_log_prob(phi.phi3))
    c1, c2, c3 = expected_counts(phi_e, h, xi.n_sensors, xi.n_actions)
    return VariationalParams(phi_e, xi.xi1 + c1, xi.xi2 + c2, xi.xi3 + c3)


def _fit_from(phi, h, xi, tol, max_sweeps):
    f = vfe(phi, h, xi)
    trace = [f]
    delta = np.inf
    for sweep in range(1, max_sweeps + 1):
        phi = cavi_sweep(phi, h, xi)
        f_new = vfe(phi, h, xi)
        trace.append(f_new)
        delta = f - f_new
        f = f_new
        if abs(delta) < tol:
            return FitReport(f, sweep, delta, True, trace, phi)
    return FitReport(f, max_sweeps, delta, False, trace, phi)


def cavi_fit(h: History, xi: HyperParams, max_sweeps: int = DEFAULT_MAX_SWEEPS,
             tol: float = DEFAULT_TOL, init: VariationalParams | None = None,
             restarts: int = 0, seed=None):
    """Coordinate-ascent fit of the mean-field posterior factor.

    Starts from ``init`` (default: uniform state beliefs, phi^i = xi^i), plus
    ``restarts`` random state initializations drawn from ``seed``; the fit
    with the lowest free energy is returned.  Raises NonConvergence (with
    the report attached) if no run meets ``tol`` within ``max_sweeps``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    start = init if init is not None else VariationalParams.initial(h.t, xi)
    _check(start, h, xi)
    best = _fit_from(start, h, xi, tol, max_sweeps)
    if restarts:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            rep = _fit_from(VariationalParams.initial(h.t, xi, rng), h, xi, tol, max_sweeps)
            if rep.vfe < best.vfe:
                best = rep
    if not best.converged:
        raise NonConvergence(f"CAVI did not reach tol={tol:g} in {max_sweeps} sweeps "
                             f"(last delta {best.last_delta:.3g})", best)
    return best.params, best


class VariationalView(MixtureView):
    """Approximate complete posterior: exact predictive factor times r(phi).

    Parameter atoms for information gain exist only when ``theta_atoms`` > 0:
    that many parameter points are drawn from the Dirichlet factors with
    ``atom_seed`` and given equal weight.  Otherwise there is one atom and
    the information gain is zero.
    """

    def __init__(self, phi: VariationalParams, cap: float = DEFAULT_CAP,
                 theta_atoms: int = 0, atom_seed=0):
        self.phi = phi
        comps = Components(np.ones(1), phi.phi_e[-1][None], phi.phi1[None], phi.phi2[None],
                           np.zeros(1, bool))
        atom_comps = None
        if theta_atoms:
            rng = np.random.default_rng(atom_seed)
            k = int(theta_atoms)
            a1 = np.stack([_dirichlet_rows(phi.phi1, rng) for _ in range(k)])
            a2 = np.stack([_dirichlet_rows(phi.phi2, rng) for _ in range(k)])
            atom_comps = Components(np.full(k, 1.0 / k), np.repeat(phi.phi_e[-1][None], k, 0),
                                    a1, a2, np.ones(k, bool), np.arange(k))
        super().__init__(comps, cap, atom_comps)

    def query(self, actions, query):
        return approx_complete_posterior_query(self, actions, query)


def _dirichlet_rows(alpha, rng):
    flat = alpha.reshape(-1, alpha.shape[-1])
    return np.asarray([rng.dirichlet(r) for r in flat]).reshape(alpha.shape)


def approx_predictive_sensor_dist(phi: VariationalParams, actions, cap: float = DEFAULT_CAP) -> np.ndarray:
    return VariationalView(phi, cap).sensor_dist(actions)


QUERIES = ("e_prev", "states", "sensors", "joint", "theta1_mean", "theta2_mean", "theta3_mean",
           "past_state", "step_joint")


def approx_complete_posterior_query(view, actions, query):
    """Marginals of the approximate complete posterior.

    ``query`` is a name or a (name, index) tuple:
    ``e_prev``; ``("past_state", tau)``; ``states``; ``sensors``; ``joint``;
    ``("step_joint", r)`` for the (s_{t+r}, e_{t+r}) marginal; and
    ``theta{1,2,3}_mean``.
    """
    if isinstance(view, VariationalParams):
        view = VariationalView(view)
    phi = view.phi
    name, arg = (query, None) if isinstance(query, str) else (query[0], query[1])
    if name == "e_prev":
        return phi.phi_e[-1].copy()
    if name == "past_state":
        return phi.phi_e[arg].copy()
    if name.endswith("_mean") and name[:6] in ("theta1", "theta2", "theta3"):
        a = getattr(phi, "phi" + name[5])
        return a / a.sum(axis=-1, keepdims=True)
    if name == "states":
        return view.env_dist(actions)
    if name == "sensors":
        return view.sensor_dist(actions)
    if name == "joint":
        return view.joint(actions)
    if name == "step_joint":
        j = view.joint(actions)
        L = len(actions)
        keep = (arg, L + arg)
        drop = tuple(i for i in range(2 * L) if i not in keep)
        return j.sum(axis=drop)
    raise UnknownQuery(f"unknown query {query!r}; accepted: {', '.join(QUERIES)}")
