"""Exact Bayesian inference for the Dirichlet-categorical state-space model.

The posterior over past states and parameters is a mixture indexed by the
past state path e_{0:t-1}.  Given a path, conjugacy makes the parameter
posterior a product of Dirichlets (prior plus counts read off the path and
the history), and the path weight is the product of Polya likelihoods of
those counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ShapeMismatch
from .loop import History
from .model import HyperParams, ThetaPoint
from .predictive import DEFAULT_CAP, Components, MixtureView, enumerate_sequences, seq_loglik
from .prob import normalize

BLOCKS = ("theta1", "theta2", "theta3")
# components lighter than this (relative to the heaviest) are dropped from
# predictive views; the lost mass is below double rounding of the joint
PRUNE_WEIGHT = 1e-18


def history_counts(paths: np.ndarray, h: History, n_states, n_sensors, n_actions):
    """Count tables (n1[P,E,S], n2[P,A,E,E], n3[P,E]) for each state path."""
    n_p, t = paths.shape
    ip = np.arange(n_p)
    n1 = np.zeros((n_p, n_states, n_sensors), dtype=np.int64)
    n2 = np.zeros((n_p, n_actions, n_states, n_states), dtype=np.int64)
    n3 = np.zeros((n_p, n_states), dtype=np.int64)
    if t == 0:
        return n1, n2, n3
    n3[ip, paths[:, 0]] = 1
    for tau, s in enumerate(h.sensors):
        n1[ip, paths[:, tau], s] += 1
    for tau, a in enumerate(h.actions, start=1):
        n2[ip, a, paths[:, tau - 1], paths[:, tau]] += 1
    return n1, n2, n3


def _check_history(h: History, xi: HyperParams):
    h.check(xi.n_sensors, xi.n_actions)


@dataclass(frozen=True)
class ExactPosteriorFactor:
    """q(e_{0:t-1}, theta | history, xi) as a path-indexed Dirichlet mixture."""

    xi: HyperParams
    history: History
    paths: np.ndarray        # (P, t)
    log_joint: np.ndarray    # (P,) unnormalized log weights (log q(s, e | a, xi))
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray

    @property
    def t(self) -> int:
        return self.history.t

    @property
    def log_evidence(self) -> float:
        return float(logsumexp(self.log_joint))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_joint - self.log_evidence)

    @property
    def alpha1(self):
        return self.xi.xi1 + self.n1

    @property
    def alpha2(self):
        return self.xi.xi2 + self.n2

    @property
    def alpha3(self):
        return self.xi.xi3 + self.n3

    def last_state_marginal(self) -> np.ndarray:
        p = np.zeros(self.xi.n_states)
        np.add.at(p, self.paths[:, -1], self.weights)
        return p

    def merged(self, blocks=BLOCKS, with_last_state=True):
        """Merge paths whose selected count tables (and e_{t-1}) coincide.

        Returns (weights, representative path indices, inverse labels).
        """
        cols = []
        if with_last_state:
            cols.append(self.paths[:, -1:])
        for b in blocks:
            n = {"theta1": self.n1, "theta2": self.n2, "theta3": self.n3}[b]
            cols.append(n.reshape(len(n), -1))
        key = np.concatenate(cols, axis=1) if cols else np.zeros((len(self.paths), 1), np.int64)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        w = np.zeros(len(first))
        np.add.at(w, inv, self.weights)
        return w, first, inv

    def components(self) -> Components:
        """Components for predictive queries, one per (e_{t-1}, counts) class."""
        w, first, _ = self.merged()
        n_e = self.xi.n_states
        e_prev = np.eye(n_e)[self.paths[first, -1]]
        return Components(w, e_prev, self.alpha1[first], self.alpha2[first],
                          np.zeros(len(w), bool), np.arange(len(w)))

    def mixture(self) -> "DirichletMixture":
        w, first, _ = self.merged()
        return DirichletMixture(w, self.paths[first, -1], self.alpha1[first],
                                self.alpha2[first], self.alpha3[first])

    def sample_hypothesis(self, rng):
        return self.mixture().sample_hypothesis(rng)


def compute_posterior_factor(h: History, xi: HyperParams, cap: float = DEFAULT_CAP) -> ExactPosteriorFactor:
    _check_history(h, xi)
    if h.t == 0:
        raise ShapeMismatch("history must contain the initial sensor value")
    paths = enumerate_sequences(xi.n_states, h.t, cap, "past state paths")
    n1, n2, n3 = history_counts(paths, h, xi.n_states, xi.n_sensors, xi.n_actions)
    log_joint = (seq_loglik(xi.xi1, n1, False) + seq_loglik(xi.xi2, n2, False)
                 + seq_loglik(xi.xi3, n3, False))
    return ExactPosteriorFactor(xi, h, paths, log_joint, n1, n2, n3)


def log_evidence(h: History, xi: HyperParams, cap: float = DEFAULT_CAP) -> float:
    """log q(s_{0:t-1} | a_{1:t-1}, xi)."""
    return compute_posterior_factor(h, xi, cap).log_evidence


@dataclass(frozen=True)
class DirichletMixture:
    """Weighted Dirichlet components with the e_{t-1} each one conditions on.

    Blocks not selected (see ``parameter_posterior``) are stored as None.
    """

    weights: np.ndarray
    e_prev: np.ndarray
    alpha1: np.ndarray = None
    alpha2: np.ndarray = None
    alpha3: np.ndarray = None

    def __len__(self):
        return len(self.weights)

    def mean(self, block: str) -> np.ndarray:
        a = getattr(self, block.replace("theta", "alpha"))
        if a is None:
            raise KeyError(block)
        m = a / a.sum(axis=-1, keepdims=True)
        return np.tensordot(self.weights, m, axes=1)

    def sample_hypothesis(self, rng):
        """Draw a component, then a parameter point from its Dirichlets.

        Returns (e_{t-1}, ThetaPoint).
        """
        c = int(rng.choice(len(self.weights), p=normalize(self.weights)))

        def draw(alpha):
            flat = alpha.reshape(-1, alpha.shape[-1])
            rows = [normalize(rng.dirichlet(row)) if row.max() < 1e8 else normalize(row)
                    for row in flat]
            return np.asarray(rows).reshape(alpha.shape)

        theta = ThetaPoint(draw(self.alpha1[c]), draw(self.alpha2[c]), draw(self.alpha3[c]))
        return int(self.e_prev[c]), theta


def parameter_posterior(factor: ExactPosteriorFactor, subset=BLOCKS) -> DirichletMixture:
    """Marginal posterior of the selected parameter blocks, merged by counts."""
    subset = tuple(subset)
    for b in subset:
        if b not in BLOCKS:
            raise KeyError(f"unknown parameter block {b!r}")
    w, first, _ = factor.merged(subset, with_last_state=False)
    kw = {b.replace("theta", "alpha"): getattr(factor, b.replace("theta", "alpha"))[first]
          for b in subset}
    return DirichletMixture(w, factor.paths[first, -1], **kw)


class ExactView(MixtureView):
    """Complete posterior with the exact posterior factor.

    Information-gain atoms are the distinct count tables of the selected
    parameter blocks.  ``prune`` drops components whose weight relative to
    the heaviest is below it (0 keeps everything).
    """

    def __init__(self, factor: ExactPosteriorFactor, cap: float = DEFAULT_CAP,
                 prune: float = PRUNE_WEIGHT):
        self.factor = factor
        w, first, _ = factor.merged(BLOCKS, with_last_state=True)
        keep = w >= prune * w.max()
        w, first = w[keep] / w[keep].sum(), first[keep]
        self._first = first
        n_e = factor.xi.n_states
        comps = Components(w, np.eye(n_e)[factor.paths[first, -1]], factor.alpha1[first],
                           factor.alpha2[first], np.zeros(len(w), bool), np.arange(len(w)))
        super().__init__(comps, cap)

    def atom_ids(self, subset=None) -> np.ndarray:
        subset = BLOCKS if subset is None else tuple(subset)
        f = self.factor
        cols = [getattr(f, {"theta1": "n1", "theta2": "n2", "theta3": "n3"}[b])[self._first]
                for b in subset]
        key = np.concatenate([c.reshape(len(self._first), -1) for c in cols], axis=1)
        _, inv = np.unique(key, axis=0, return_inverse=True)
        return inv.ravel()


CompletePosterior = ExactView


def complete_posterior(h: History, xi: HyperParams, cap: float = DEFAULT_CAP) -> ExactView:
    return ExactView(compute_posterior_factor(h, xi, cap), cap)


def predictive_env_dist(cp: ExactView, actions) -> np.ndarray:
    return cp.env_dist(actions)


def predictive_sensor_dist(cp: ExactView, actions) -> np.ndarray:
    return cp.sensor_dist(actions)


def sensor_given_env_dist(cp: ExactView, path, actions) -> np.ndarray:
    return cp.sensor_given_env(path, actions)
