"""The agent's hierarchical generative model.

Parameters (all tables row-stochastic along the last axis):

* ``theta1[e, s]``      sensor model q(s | e)
* ``theta2[a, e, e']``  transition model q(e' | a, e)
* ``theta3[e]``         initial state q(e_0)

each with a Dirichlet hyperprior of matching shape (``xi1``, ``xi2``,
``xi3``).  The hyperparameters are fixed configuration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, InvalidDistribution, ShapeMismatch
from .loop import EnvironmentSpec, stochastic_table
from .prob import categorical


def _positive(arr, name):
    a = np.array(arr, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise InvalidDistribution(f"{name}: concentrations must be finite and > 0")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HyperParams:
    xi1: np.ndarray
    xi2: np.ndarray
    xi3: np.ndarray

    def __post_init__(self):
        xi1 = _positive(self.xi1, "xi1")
        xi2 = _positive(self.xi2, "xi2")
        xi3 = _positive(self.xi3, "xi3")
        n_e = xi3.shape[0] if xi3.ndim == 1 else -1
        if xi3.ndim != 1 or xi1.ndim != 2 or xi1.shape[0] != n_e:
            raise ShapeMismatch(f"xi1 {xi1.shape} / xi3 {xi3.shape} disagree on |E|")
        if xi2.ndim != 3 or xi2.shape[1:] != (n_e, n_e):
            raise ShapeMismatch(f"xi2 shape {xi2.shape} incompatible with |E|={n_e}")
        object.__setattr__(self, "xi1", xi1)
        object.__setattr__(self, "xi2", xi2)
        object.__setattr__(self, "xi3", xi3)

    @property
    def n_states(self) -> int:
        return self.xi3.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.xi1.shape[1]

    @property
    def n_actions(self) -> int:
        return self.xi2.shape[0]

    @classmethod
    def uniform(cls, n_states, n_sensors, n_actions, concentration=1.0):
        c = float(concentration)
        return cls(np.full((n_states, n_sensors), c),
                   np.full((n_actions, n_states, n_states), c),
                   np.full(n_states, c))

    @classmethod
    def from_theta(cls, theta: "ThetaPoint", concentration=1e12, floor=1e-12):
        """Near-point Dirichlets centred on a known parameter."""
        def conc(t):
            return np.maximum(np.asarray(t) * concentration, floor)
        return cls(conc(theta.theta1), conc(theta.theta2), conc(theta.theta3))


@dataclass(frozen=True)
class ThetaPoint:
    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray

    def __post_init__(self):
        t1 = stochastic_table(self.theta1, "theta1")
        t2 = stochastic_table(self.theta2, "theta2")
        t3 = categorical(self.theta3)
        n_e = t3.shape[0]
        if t1.ndim != 2 or t1.shape[0] != n_e or t2.ndim != 3 or t2.shape[1:] != (n_e, n_e):
            raise ShapeMismatch("theta tables disagree on |E|")
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)
        object.__setattr__(self, "theta3", t3)

    @property
    def n_states(self) -> int:
        return self.theta3.shape[0]

    @classmethod
    def from_env(cls, env: EnvironmentSpec) -> "ThetaPoint":
        return cls(env.sensor, env.transition, env.initial)

    @classmethod
    def uniform(cls, n_states, n_sensors, n_actions):
        return cls(np.full((n_states, n_sensors), 1.0 / n_sensors),
                   np.full((n_actions, n_states, n_states), 1.0 / n_states),
                   np.full(n_states, 1.0 / n_states))


@dataclass(frozen=True)
class HorizonRule:
    """Fixed final step (T_hat = T) or sliding window (T_hat = t + n)."""

    kind: str = "sliding"
    value: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed", "sliding"):
            raise ValueError(f"unknown horizon rule {self.kind!r}")
        if self.value < 0:
            raise ValueError("horizon value must be non-negative")

    def horizon_for(self, t: int) -> int:
        if t < 1:
            raise ValueError("horizon defined for t >= 1")
        return self.value if self.kind == "fixed" else t + self.value

    def length(self, t: int) -> int:
        """Number of future steps t..T_hat (at least one)."""
        return max(self.horizon_for(t) - t + 1, 1)


def horizon_for(rule: HorizonRule, t: int) -> int:
    return rule.horizon_for(t)


def _check_seq(seq, size, what):
    for v in seq:
        if not 0 <= v < size:
            raise IndexOutOfRange(f"{what} {v} outside 0..{size - 1}")


def predictive_factor(sensors: Sequence[int], states: Sequence[int], actions: Sequence[int],
                      e_prev: int, theta: ThetaPoint) -> float:
    """prod_r theta1[e_r, s_r] * theta2[a_r, e_{r-1}, e_r] over the future block."""
    if not len(sensors) == len(states) == len(actions):
        raise ShapeMismatch("future sequences must have equal length")
    n_e, n_s = theta.theta1.shape
    _check_seq(sensors, n_s, "sensor")
    _check_seq(states, n_e, "state")
    _check_seq(actions, theta.theta2.shape[0], "action")
    _check_seq([e_prev], n_e, "state")
    p = 1.0
    prev = e_prev
    for s, e, a in zip(sensors, states, actions):
        p *= theta.theta1[e, s] * theta.theta2[a, prev, e]
        prev = e
    return float(p)


def joint_model_prob(sensors: Sequence[int], states: Sequence[int], actions: Sequence[int],
                     theta: ThetaPoint, action_dists) -> float:
    """Discrete part of the model joint given theta.

    ``sensors``/``states`` run over 0..T_hat, ``actions`` over 1..T_hat and
    ``action_dists[i]`` is the model's q(a_{i+1}).
    """
    if len(sensors) != len(states) or len(actions) != len(states) - 1:
        raise ShapeMismatch("need T_hat+1 sensors and states and T_hat actions")
    if len(action_dists) != len(actions):
        raise ShapeMismatch("one action distribution per action")
    n_e, n_s = theta.theta1.shape
    _check_seq(sensors, n_s, "sensor")
    _check_seq(states, n_e, "state")
    _check_seq(actions, theta.theta2.shape[0], "action")
    p = theta.theta3[states[0]] * theta.theta1[states[0], sensors[0]]
    for r, a in enumerate(actions, start=1):
        p *= (np.asarray(action_dists[r - 1])[a] * theta.theta2[a, states[r - 1], states[r]]
              * theta.theta1[states[r], sensors[r]])
    return float(p)


def desired_schedule(p_d, n_sensors: int, length: int) -> np.ndarray:
    """Normalize a desired prior to a (length, |S|) per-step schedule.

    Accepts a single distribution (time-homogeneous) or a list with one row
    per future step; a shorter list repeats its last row.
    """
    arr = np.asarray(p_d, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_sensors:
        raise ShapeMismatch(f"desired prior shape {arr.shape} vs |S|={n_sensors}")
    rows = [arr[min(i, arr.shape[0] - 1)] for i in range(length)]
    return stochastic_table(np.stack(rows), "desired prior")


def smooth(p, eps: float) -> np.ndarray:
    """(1 - eps) p + eps * uniform; keeps a delta preference absolutely continuous."""
    p = np.asarray(p, dtype=float)
    if eps == 0:
        return p
    return (1 - eps) * p + eps / p.shape[-1]
