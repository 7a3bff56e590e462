"""Finite environment classes and their embedding as a history-state model.

A class is a weighted set of sensor predictors p(s_t | a_t, sa_{<t}).  The
embedding identifies each history with a model state so the generic
Dirichlet machinery can be run on it and compared with the direct
mixture update.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ComplexityRefusal, IndexOutOfRange, ShapeMismatch, ZeroEvidence
from .exact import complete_posterior, log_evidence
from .loop import EnvironmentSpec, History, memory_append
from .model import HyperParams, ThetaPoint
from .predictive import DEFAULT_CAP
from .prob import categorical, normalize_log


def _flat(h: History) -> tuple:
    """(s_0, a_1, s_1, ..., a_{t-1}, s_{t-1})."""
    out = list(h.sensors[:1])
    for a, s in zip(h.actions, h.sensors[1:]):
        out += [a, s]
    return tuple(out)


class PomdpComponent:
    """Sensor predictor of a known hidden-state environment (forward filtering)."""

    def __init__(self, env: EnvironmentSpec):
        self.env = env
        self.n_sensors = env.n_sensors
        self.n_actions = env.n_actions

    def _belief(self, h: History) -> np.ndarray:
        """p(e_{t-1} | sa_{<t}); raises ZeroEvidence on impossible histories."""
        env = self.env
        b = env.initial.copy()
        for i, s in enumerate(h.sensors):
            if i > 0:
                b = b @ env.transition[h.actions[i - 1]]
            b = b * env.sensor[:, s]
            z = b.sum()
            if z <= 0:
                raise ZeroEvidence(f"history impossible under component at step {i}")
            b = b / z
        return b

    def predict(self, h: History, a: int | None = None) -> np.ndarray:
        if h.t == 0:
            return self.env.initial @ self.env.sensor
        return self._belief(h) @ self.env.transition[a] @ self.env.sensor


class TableComponent:
    """Extensional predictor: flat history + action -> sensor distribution.

    ``table`` maps (s_0, a_1, s_1, ..., s_{t-1}, a_t) to p(s_t).  Histories
    missing from the table fall back to ``default`` (when given).
    """

    def __init__(self, initial, table: dict, n_actions: int, default=None):
        self.initial = categorical(initial)
        self.n_sensors = self.initial.shape[0]
        self.n_actions = int(n_actions)
        self.table = {tuple(int(x) for x in k): categorical(v) for k, v in table.items()}
        self.default = None if default is None else categorical(default)
        for v in self.table.values():
            if v.shape != (self.n_sensors,):
                raise ShapeMismatch("table entries must be distributions over the sensor values")

    @classmethod
    def from_rule(cls, initial, rule, n_actions: int, depth: int):
        """Tabulate ``rule(flat_history, a)`` for all histories of up to ``depth`` steps."""
        initial = categorical(initial)
        n_s = initial.shape[0]
        table = {}
        for k in range(depth + 1):
            for s0 in range(n_s):
                for tail in itertools.product(range(n_actions), range(n_s), repeat=k):
                    for a in range(n_actions):
                        key = (s0,) + tail
                        table[key + (a,)] = rule(key, a)
        return cls(initial, table, n_actions)

    def predict(self, h: History, a: int | None = None) -> np.ndarray:
        if h.t == 0:
            return self.initial
        key = _flat(h) + (int(a),)
        if key in self.table:
            return self.table[key]
        if self.default is None:
            raise IndexOutOfRange(f"history {key} not covered by the table")
        return self.default


@dataclass(frozen=True)
class EnvClass:
    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = categorical(self.weights)
        if len(comps) != w.shape[0]:
            raise ShapeMismatch(f"{len(comps)} components but {w.shape[0]} weights")
        if len({(c.n_sensors, c.n_actions) for c in comps}) != 1:
            raise ShapeMismatch("components disagree on the sensor or action spaces")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def n_sensors(self) -> int:
        return self.components[0].n_sensors

    @property
    def n_actions(self) -> int:
        return self.components[0].n_actions

    def component_predictions(self, h: History, a: int | None = None) -> np.ndarray:
        """(K, S) matrix of p(s | nu, h, a)."""
        if h.t > 0 and a is None:
            raise ShapeMismatch("an action is needed after the initial sensor value")
        h.check(self.n_sensors, self.n_actions)
        return np.stack([c.predict(h, a) for c in self.components])

    def predictive(self, h: History, a: int | None = None) -> np.ndarray:
        """Mixture predictive sum_nu p(s | nu, h, a) w(nu)."""
        return self.weights @ self.component_predictions(h, a)

    def with_weights(self, weights) -> "EnvClass":
        return EnvClass(self.components, weights)


def mixture_update(spec: EnvClass, s: int, a: int | None, h: History) -> EnvClass:
    """Bayes update of the class weights after observing s following (h, a)."""
    if not 0 <= s < spec.n_sensors:
        raise IndexOutOfRange(f"sensor value {s} outside 0..{spec.n_sensors - 1}")
    lik = spec.component_predictions(h, a)[:, s]
    post = spec.weights * lik
    z = post.sum()
    if not z > 0:
        raise ZeroEvidence(f"no component assigns positive probability to sensor value {s}")
    return spec.with_weights(post / z)


def sequential_update(spec: EnvClass, h: History) -> EnvClass:
    """Run mixture_update over every sensor value of ``h`` in order."""
    cur = History()
    out = spec
    for i, s in enumerate(h.sensors):
        a = h.actions[i - 1] if i > 0 else None
        out = mixture_update(out, s, a, cur)
        cur = History((s,), ()) if i == 0 else memory_append(cur, s, a)
    return out


@dataclass(frozen=True)
class HistoryEmbedding:
    """History-state model: one point parameter per class component.

    States are flat histories (s_0, a_1, s_1, ...).  The transition under
    action a moves e to e + (a, s) with probability p(s | nu, e, a), every
    other target gets 0.  Histories of maximal depth are absorbing.  The
    sensor of a state is its last entry, except that with a fixed ``root``
    the single root state emits s_0 with the component's initial predictive.
    """

    states: tuple
    index: dict
    thetas: tuple
    weights: np.ndarray
    root: int | None

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_of(self, h: History) -> int:
        return self.index[_flat(h)]

    def hyperparams(self, k: int, concentration: float = 1e12) -> HyperParams:
        """Near-point Dirichlet prior centred on component ``k``."""
        return HyperParams.from_theta(self.thetas[k], concentration)


def embed_history_env(spec: EnvClass, t: int, root: int | None = None,
                      cap: float = DEFAULT_CAP) -> HistoryEmbedding:
    """Embed the class on histories with at most ``t`` action/sensor steps.

    With ``root`` given only histories starting at that s_0 are kept.
    """
    n_s, n_a = spec.n_sensors, spec.n_actions
    roots = range(n_s) if root is None else [int(root)]
    n_e = len(roots) * sum((n_s * n_a) ** k for k in range(t + 1))
    size = float(n_a) * n_e * n_e
    if size > cap:
        raise ComplexityRefusal("history-state transition table", size, cap)
    states = []
    for k in range(t + 1):
        for s0 in roots:
            for tail in itertools.product(range(n_a), range(n_s), repeat=k):
                states.append((s0,) + tail)
    index = {e: i for i, e in enumerate(states)}
    thetas = []
    for comp in spec.components:
        th1 = np.zeros((n_e, n_s))
        th2 = np.zeros((n_a, n_e, n_e))
        for i, e in enumerate(states):
            th1[i, e[-1]] = 1.0
            h = History(e[0::2], e[1::2])
            for a in range(n_a):
                if h.t > t:
                    th2[a, i, i] = 1.0
                    continue
                p = comp.predict(h, a)
                for s in range(n_s):
                    th2[a, i, index[e + (a, s)]] = p[s]
        init = comp.predict(History())
        th3 = np.zeros(n_e)
        if root is None:
            th3[: n_s] = init
        else:
            th3[0] = 1.0
            th1[0] = init
        thetas.append(ThetaPoint(th1, th2, th3))
    return HistoryEmbedding(tuple(states), index, tuple(thetas), spec.weights, root)


def embedded_component_posterior(spec: EnvClass, h: History, root: bool = True,
                                 concentration: float = 1e12, cap: float = DEFAULT_CAP) -> np.ndarray:
    """Posterior over the component index from the generic exact evidence.

    Runs exact inference on the history embedding once per component
    (near-point prior) and weights the evidences by the class weights.
    """
    if h.t == 0:
        return spec.weights.copy()
    emb = embed_history_env(spec, h.t - 1, h.sensors[0] if root else None, cap)
    with np.errstate(divide="ignore"):
        logw = np.log(spec.weights)
    logs = np.array([logw[k] + log_evidence(h, emb.hyperparams(k, concentration), cap)
                     for k in range(len(spec.components))])
    return normalize_log(logs)[0]


def embedded_predictive(spec: EnvClass, h: History, a: int, root: bool = True,
                        concentration: float = 1e12, cap: float = DEFAULT_CAP) -> np.ndarray:
    """One-step sensor predictive from the generic complete posterior on the embedding."""
    if h.t == 0:
        raise ShapeMismatch("the one-step predictive needs the initial sensor value")
    emb = embed_history_env(spec, h.t, h.sensors[0] if root else None, cap)
    with np.errstate(divide="ignore"):
        logw = np.log(spec.weights)
    logs, preds = [], []
    for k in range(len(spec.components)):
        xi = emb.hyperparams(k, concentration)
        logs.append(logw[k] + log_evidence(h, xi, cap))
        preds.append(complete_posterior(h, xi, cap).sensor_dist((a,)))
    return normalize_log(np.array(logs))[0] @ np.array(preds)
