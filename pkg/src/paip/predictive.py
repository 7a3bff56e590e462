"""Posterior predictives over a future block by exhaustive enumeration.

Every complete posterior used by the agents (exact, variational, known
parameters, finite model class) reduces to a finite mixture of components.
Component ``c`` carries a weight, a distribution over the last past state
e_{t-1}, and Dirichlet concentrations for the sensor and transition tables.
For a future action block of length L the view enumerates all |E|^L state
paths and |S|^L sensor sequences and scores each with the sequential Polya
likelihood, which integrates repeated use of the same table row exactly.
A component flagged ``point`` uses its normalized concentrations as a fixed
parameter instead.

Joint tensors are laid out as ``(s_t, ..., s_T, e_t, ..., e_T)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (ComplexityRefusal, ConditioningOnNullEvent, IndexOutOfRange,
                     ShapeMismatch, UnsupportedView)
from .prob import log_polya, mutual_information, xlogy

DEFAULT_CAP = 10 ** 6
NULL_EVENT = 1e-300


def enumerate_sequences(n_values: int, length: int, cap: float = DEFAULT_CAP,
                        what: str = "sequence space") -> np.ndarray:
    """All sequences in lexicographic order as an (n_values**length, length) array."""
    size = float(n_values) ** length
    if size > cap:
        raise ComplexityRefusal(what, size, cap)
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(n_values), repeat=length)), dtype=np.int64)


def seq_loglik(alpha, counts, point):
    """Log likelihood of count tables under Dirichlet rows (last axis).

    ``alpha`` broadcasts against ``counts``; all but the leading batch axes
    of ``alpha.ndim`` are summed out.
    """
    alpha = np.asarray(alpha, dtype=float)
    if point:
        theta = alpha / alpha.sum(axis=-1, keepdims=True)
        ll = xlogy(counts, theta).sum(axis=-1)
    else:
        ll = log_polya(alpha, counts)
    return ll.reshape(ll.shape[: ll.ndim - (alpha.ndim - 1)] + (-1,)).sum(axis=-1)


@dataclass
class Components:
    weights: np.ndarray          # (C,)
    e_prev: np.ndarray           # (C, E) distribution over e_{t-1}
    alpha1: np.ndarray           # (C, E, S)
    alpha2: np.ndarray           # (C, A, E, E)
    point: np.ndarray            # (C,) bool
    atoms: np.ndarray = None     # (C,) atom label for information gain

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.e_prev = np.asarray(self.e_prev, dtype=float)
        self.alpha1 = np.asarray(self.alpha1, dtype=float)
        self.alpha2 = np.asarray(self.alpha2, dtype=float)
        self.point = np.broadcast_to(np.asarray(self.point, dtype=bool), self.weights.shape).copy()
        if self.atoms is None:
            self.atoms = np.zeros(self.weights.shape[0], dtype=np.int64)
        c = self.weights.shape[0]
        n_e, n_s = self.alpha1.shape[1:]
        if (self.e_prev.shape != (c, n_e) or self.alpha1.shape[0] != c
                or self.alpha2.shape[0] != c or self.alpha2.shape[2:] != (n_e, n_e)):
            raise ShapeMismatch("component arrays disagree")

    @property
    def n_states(self):
        return self.alpha1.shape[1]

    @property
    def n_sensors(self):
        return self.alpha1.shape[2]

    @property
    def n_actions(self):
        return self.alpha2.shape[1]


class MixtureView:
    """Predictive queries against a finite mixture of components.

    Results are cached per action block.  ``atom_components`` (optional)
    replaces the components when computing atom/sensor joints for
    information gain.
    """

    supports_info_gain = True

    def __init__(self, components: Components, cap: float = DEFAULT_CAP, atom_components=None):
        self.comps = components
        self.cap = cap
        self.atom_components = atom_components
        self._sens_cache = {}
        self._env_cache = {}
        self._joint_cache = {}

    # sizes
    @property
    def n_states(self):
        return self.comps.n_states

    @property
    def n_sensors(self):
        return self.comps.n_sensors

    @property
    def n_actions(self):
        return self.comps.n_actions

    def _check_actions(self, actions):
        actions = tuple(int(a) for a in actions)
        for a in actions:
            if not 0 <= a < self.n_actions:
                raise IndexOutOfRange(f"action {a} outside 0..{self.n_actions - 1}")
        return actions

    # core computations -------------------------------------------------
    def _sensor_loglik(self, comps: Components, length: int, key) -> np.ndarray:
        """(C, P, Q) log q(s-seq | e-path) per component."""
        cache_key = (key, length)
        if cache_key in self._sens_cache:
            return self._sens_cache[cache_key]
        n_e, n_s = comps.n_states, comps.n_sensors
        size = float(n_e) ** length * float(n_s) ** length
        if size > self.cap:
            raise ComplexityRefusal("joint sensor/state futures", size, self.cap)
        paths = enumerate_sequences(n_e, length, self.cap, "future state paths")
        seqs = enumerate_sequences(n_s, length, self.cap, "future sensor sequences")
        n_p, n_q = len(paths), len(seqs)
        counts = np.zeros((n_p, n_q, n_e, n_s), dtype=np.int64)
        ip = np.arange(n_p)[:, None]
        iq = np.arange(n_q)[None, :]
        for r in range(length):
            counts[ip, iq, paths[:, r][:, None], seqs[:, r][None, :]] += 1
        out = np.empty((len(comps.weights), n_p, n_q))
        for c in range(len(comps.weights)):
            out[c] = seq_loglik(comps.alpha1[c], counts, comps.point[c])
        self._sens_cache[cache_key] = out
        return out

    def _env_loglik(self, comps: Components, actions, key) -> np.ndarray:
        """(C, P) log q(e-path | actions) per component, e_{t-1} mixed in."""
        cache_key = (key, actions)
        if cache_key in self._env_cache:
            return self._env_cache[cache_key]
        n_e, n_a = comps.n_states, comps.n_actions
        length = len(actions)
        paths = enumerate_sequences(n_e, length, self.cap, "future state paths")
        n_p = len(paths)
        counts = np.zeros((n_e, n_p, n_a, n_e, n_e), dtype=np.int64)
        ip = np.arange(n_p)
        for e0 in range(n_e):
            prev = np.full(n_p, e0)
            for r, a in enumerate(actions):
                counts[e0, ip, a, prev, paths[:, r]] += 1
                prev = paths[:, r]
        out = np.empty((len(comps.weights), n_p))
        with np.errstate(divide="ignore"):
            log_prev = np.log(comps.e_prev)
        for c in range(len(comps.weights)):
            ll = seq_loglik(comps.alpha2[c], counts, comps.point[c])   # (E, P)
            out[c] = logsumexp(ll + log_prev[c][:, None], axis=0)
        self._env_cache[cache_key] = out
        return out

    def _component_joint(self, comps, actions, key):
        """(C, P, Q) weighted joint of sensor sequence and state path."""
        env = self._env_loglik(comps, actions, key)
        sens = self._sensor_loglik(comps, len(actions), key)
        with np.errstate(divide="ignore"):
            logw = np.log(comps.weights)
        return np.exp(logw[:, None, None] + env[:, :, None] + sens)

    def _joint_pq(self, actions):
        if actions not in self._joint_cache:
            self._joint_cache[actions] = self._component_joint(self.comps, actions, "main").sum(axis=0)
        return self._joint_cache[actions]

    # public queries ------------------------------------------------------
    def joint(self, actions) -> np.ndarray:
        """d(s_{t:T}, e_{t:T} | actions) laid out (s..., e...)."""
        actions = self._check_actions(actions)
        length = len(actions)
        jpq = self._joint_pq(actions)
        return jpq.T.reshape((self.n_sensors,) * length + (self.n_states,) * length)

    def env_dist(self, actions) -> np.ndarray:
        actions = self._check_actions(actions)
        env = self._env_loglik(self.comps, actions, "main")
        p = (self.comps.weights[:, None] * np.exp(env)).sum(axis=0)
        return p.reshape((self.n_states,) * len(actions))

    def sensor_dist(self, actions) -> np.ndarray:
        actions = self._check_actions(actions)
        q = self._joint_pq(actions).sum(axis=0)
        return q.reshape((self.n_sensors,) * len(actions))

    def sensor_given_env(self, path, actions) -> np.ndarray:
        actions = self._check_actions(actions)
        path = tuple(int(e) for e in path)
        if len(path) != len(actions):
            raise ShapeMismatch("state path and action block differ in length")
        idx = int(np.ravel_multi_index(path, (self.n_states,) * len(path))) if path else 0
        col = self._joint_pq(actions)[idx]
        total = col.sum()
        if total < NULL_EVENT:
            raise ConditioningOnNullEvent(f"state path {path} has probability {total:.3g}")
        return (col / total).reshape((self.n_sensors,) * len(actions))

    def atom_ids(self, subset=None) -> np.ndarray:
        comps = self.atom_components or self.comps
        return comps.atoms

    def atom_sensor_joint(self, actions, subset=None) -> np.ndarray:
        """(K, |S|^L) joint of parameter atom and future sensor sequence."""
        if not self.supports_info_gain:
            raise UnsupportedView(f"{type(self).__name__} does not expose parameter posteriors")
        actions = self._check_actions(actions)
        comps = self.atom_components or self.comps
        key = "main" if comps is self.comps else "atoms"
        per_c = self._component_joint(comps, actions, key).sum(axis=1)   # (C, Q)
        ids = self.atom_ids(subset)
        _, inv = np.unique(ids, return_inverse=True)
        out = np.zeros((inv.max() + 1, per_c.shape[1]))
        np.add.at(out, inv, per_c)
        return out

    def info_gain(self, actions, subset=None) -> float:
        return mutual_information(self.atom_sensor_joint(actions, subset))


def component_mixture_weights(comps: Components) -> np.ndarray:
    return comps.weights / comps.weights.sum()


@dataclass
class PointModel:
    """Convenience container: one known parameter with a belief over e_{t-1}."""

    theta1: np.ndarray
    theta2: np.ndarray
    e_prev: np.ndarray = field(default=None)

    def components(self) -> Components:
        n_e = self.theta1.shape[0]
        e_prev = np.full(n_e, 1.0 / n_e) if self.e_prev is None else np.asarray(self.e_prev, float)
        return Components(np.ones(1), e_prev[None], np.asarray(self.theta1)[None],
                          np.asarray(self.theta2)[None], np.ones(1, bool))
