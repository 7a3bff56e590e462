"""Active inference: a softmax action prior coupled to the variational posterior.

The objective over (pi, phi [, phi_gamma]) is

    vfe(phi) + KL[r(a | pi) || q(a | gamma_bar, phi)]  [+ KL[Gamma(phi_gamma) || Gamma(xi_gamma)]]

with q(a | gamma, phi) proportional to exp(gamma * Q(a, phi)).  It is minimized
by block-coordinate descent: a CAVI sweep on phi with the action prior
frozen, the closed-form pi update, then an optional damped precision update.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import NonConvergence
from .exact import complete_posterior
from .loop import History
from .model import HyperParams
from .motivations import MotivationConfig, make_action_value
from .predictive import DEFAULT_CAP
from .prob import digamma
from .selection import first_action_marginal, log_softmax, q_table, sequence_softmax
from .variational import DEFAULT_TOL, VariationalParams, VariationalView, cavi_sweep, vfe

OUTER_TOL = 1e-7
OUTER_MAX_ITER = 200
DAMPING = 0.5
RATE_FLOOR = 1e-2


@dataclass(frozen=True)
class PrecisionParams:
    """Gamma(shape, rate) over the softmax precision."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma parameters must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


def gamma_kl(p: PrecisionParams, q: PrecisionParams) -> float:
    """KL[Gamma(p) || Gamma(q)] for shape/rate parameterizations."""
    a1, b1, a2, b2 = p.shape, p.rate, q.shape, q.rate
    return float((a1 - a2) * digamma(a1) - gammaln(a1) + gammaln(a2)
                 + a2 * (np.log(b1) - np.log(b2)) + a1 * (b2 - b1) / b1)


def log_kl(log_p, log_q) -> float:
    """KL[p || q] from log-probabilities; robust when q underflows in linear scale."""
    log_p = np.asarray(log_p, dtype=float)
    p = np.exp(log_p)
    support = p > 0
    return max(float(np.sum(p[support] * (log_p[support] - np.asarray(log_q)[support]))), 0.0)


def value_table(phi: VariationalParams, cfg: MotivationConfig, model_length: int, n_actions: int,
                cap: float = DEFAULT_CAP) -> np.ndarray:
    """Q(a, phi) for every action block in lexicographic order."""
    Q = make_action_value(VariationalView(phi, cap), cfg, model_length)
    return q_table(Q, n_actions, cap)[1]


def action_prior(phi: VariationalParams, gamma: float, cfg: MotivationConfig, model_length: int,
                 n_actions: int, cap: float = DEFAULT_CAP) -> np.ndarray:
    """q(a | phi) proportional to exp(gamma * Q(a, phi)) over all action blocks."""
    return sequence_softmax(value_table(phi, cfg, model_length, n_actions, cap), gamma)


def bayesian_action_target(h: History, xi: HyperParams, gamma: float, cfg: MotivationConfig,
                           model_length: int, cap: float = DEFAULT_CAP) -> np.ndarray:
    """The softmax over Q computed from the exact complete posterior."""
    return np.exp(_log_bayesian_target(h, xi, gamma, cfg, model_length, cap))


def _log_bayesian_target(h, xi, gamma, cfg, model_length, cap):
    Q = make_action_value(complete_posterior(h, xi, cap), cfg, model_length)
    return log_softmax(q_table(Q, xi.n_actions, cap)[1], gamma)


def active_objective(pi, phi: VariationalParams, h: History, xi: HyperParams, cfg: MotivationConfig,
                     model_length: int, gamma: float = 1.0, phi_gamma: PrecisionParams | None = None,
                     xi_gamma: PrecisionParams | None = None, target=None,
                     cap: float = DEFAULT_CAP) -> float:
    """vfe(phi) + KL[pi || action prior] (+ Gamma KL when precision is modeled).

    With ``target`` given, it replaces the phi-dependent action prior.
    """
    if phi_gamma is not None:
        gamma = phi_gamma.mean
    if target is not None:
        with np.errstate(divide="ignore"):
            log_prior = np.log(target)
    else:
        log_prior = log_softmax(value_table(phi, cfg, model_length, xi.n_actions, cap), gamma)
    with np.errstate(divide="ignore"):
        value = vfe(phi, h, xi) + log_kl(np.log(pi), log_prior)
    if phi_gamma is not None:
        value += gamma_kl(phi_gamma, xi_gamma)
    return value


@dataclass
class ActiveFitReport:
    trace: list
    converged: bool
    iterations: int
    phi: VariationalParams = None
    phi_gamma: PrecisionParams = None
    pi: np.ndarray = None
    gamma_trace: list = field(default_factory=list)
    cavi_delta: float = np.inf


def optimize(h: History, xi: HyperParams, cfg: MotivationConfig, model_length: int,
             gamma: float = 1.0, xi_gamma: PrecisionParams | None = None,
             tol: float = OUTER_TOL, max_iter: int = OUTER_MAX_ITER, damping: float = DAMPING,
             target: str = "variational", cavi_tol: float = DEFAULT_TOL,
             init: VariationalParams | None = None, cap: float = DEFAULT_CAP):
    """Minimize the active-inference objective.

    ``target="bayesian"`` freezes the action term at the exact-posterior
    softmax, in which case the problem splits into plain CAVI for phi and
    pi equal to that softmax.  ``xi_gamma`` switches on the precision
    extension; otherwise the precision is the fixed ``gamma``.

    Stops when the objective changes by less than ``tol`` and the last CAVI
    sweep changed the free energy by less than ``cavi_tol``.  Returns
    (phi, phi_gamma, pi, report); raises NonConvergence with the report.
    """
    if target not in ("variational", "bayesian"):
        raise ValueError(f"unknown action target {target!r}")
    n_a = xi.n_actions
    phi = init if init is not None else VariationalParams.initial(h.t, xi)
    phi_gamma = xi_gamma
    g = phi_gamma.mean if phi_gamma is not None else gamma
    fixed_target = (_log_bayesian_target(h, xi, g, cfg, model_length, cap)
                    if target == "bayesian" else None)
    n_seq = n_a ** cfg.action_length(model_length)
    log_pi = np.full(n_seq, -np.log(n_seq))

    def objective(log_pi, phi, phi_gamma, values=None):
        g_bar = phi_gamma.mean if phi_gamma is not None else gamma
        if fixed_target is not None:
            log_prior = fixed_target
        else:
            vals = values if values is not None else value_table(phi, cfg, model_length, n_a, cap)
            log_prior = log_softmax(vals, g_bar)
        out = vfe(phi, h, xi) + log_kl(log_pi, log_prior)
        if phi_gamma is not None:
            out += gamma_kl(phi_gamma, xi_gamma)
        return out

    prev = objective(log_pi, phi, phi_gamma)
    trace = [prev]
    gamma_trace = [g]
    f_phi = vfe(phi, h, xi)
    cavi_delta = np.inf
    for it in range(1, max_iter + 1):
        # (1) phi-block: one CAVI sweep, action prior held fixed
        phi = cavi_sweep(phi, h, xi)
        f_new = vfe(phi, h, xi)
        cavi_delta, f_phi = f_phi - f_new, f_new
        # (2) pi-block: closed-form minimizer of the KL term
        values = None
        if fixed_target is not None:
            log_pi = fixed_target.copy()
        else:
            values = value_table(phi, cfg, model_length, n_a, cap)
            log_pi = log_softmax(values, phi_gamma.mean if phi_gamma is not None else gamma)
        # (3) precision block: damped rate update from the expected action value
        if phi_gamma is not None and values is not None:
            advantage = float(np.exp(log_pi) @ values - values.mean())
            rate_target = max(xi_gamma.rate - advantage, RATE_FLOOR * xi_gamma.rate)
            phi_gamma = PrecisionParams(xi_gamma.shape,
                                        (1 - damping) * phi_gamma.rate + damping * rate_target)
        obj = objective(log_pi, phi, phi_gamma, values)
        trace.append(obj)
        gamma_trace.append(phi_gamma.mean if phi_gamma is not None else gamma)
        if abs(prev - obj) < tol and abs(cavi_delta) < cavi_tol:
            pi = np.exp(log_pi)
            rep = ActiveFitReport(trace, True, it, phi, phi_gamma, pi, gamma_trace, cavi_delta)
            return phi, phi_gamma, pi, rep
        prev = obj
    rep = ActiveFitReport(trace, False, max_iter, phi, phi_gamma, np.exp(log_pi), gamma_trace,
                          cavi_delta)
    raise NonConvergence(f"active inference did not converge in {max_iter} iterations", rep)


def act(pi, n_actions: int) -> np.ndarray:
    """Marginal of the action-block distribution on its first action."""
    return first_action_marginal(pi, n_actions)

