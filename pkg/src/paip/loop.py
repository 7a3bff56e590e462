"""The ground-truth perception-action loop.

Indexing: sensors start at t = 0, actions at t = 1.  The agent at step t
sees the memory ``History(sensors=s_0..s_{t-1}, actions=a_1..a_{t-1})`` and
returns a distribution over a_t; the environment then moves to e_t and emits
s_t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import AgentStepError, IndexOutOfRange, InvalidDistribution, ShapeMismatch
from .prob import NORM_TOL, categorical, make_rng, sample_categorical


def stochastic_table(table, name: str = "table") -> np.ndarray:
    """Validate an array whose last axis holds distributions (one per row)."""
    arr = np.array(table, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise InvalidDistribution(f"{name}: empty target space")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidDistribution(f"{name}: entries must be finite and non-negative")
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > NORM_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0]) if sums.ndim else ()
        raise InvalidDistribution(f"{name}{list(idx)} sums to {float(sums[idx])!r}")
    arr /= sums[..., None]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EnvironmentSpec:
    """initial[e], transition[a, e, e'], sensor[e, s]."""

    initial: np.ndarray
    transition: np.ndarray
    sensor: np.ndarray

    def __post_init__(self):
        init = categorical(self.initial)
        trans = stochastic_table(self.transition, "transition")
        sens = stochastic_table(self.sensor, "sensor")
        n_e = init.shape[0]
        if trans.ndim != 3 or trans.shape[1:] != (n_e, n_e):
            raise ShapeMismatch(f"transition shape {trans.shape} incompatible with |E|={n_e}")
        if sens.ndim != 2 or sens.shape[0] != n_e:
            raise ShapeMismatch(f"sensor shape {sens.shape} incompatible with |E|={n_e}")
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "transition", trans)
        object.__setattr__(self, "sensor", sens)

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.sensor.shape[1]


@dataclass(frozen=True)
class History:
    sensors: tuple = ()
    actions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(int(s) for s in self.sensors))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if self.sensors and len(self.sensors) != len(self.actions) + 1:
            raise ShapeMismatch(
                f"{len(self.sensors)} sensors need {len(self.sensors) - 1} actions, "
                f"got {len(self.actions)}")
        if not self.sensors and self.actions:
            raise ShapeMismatch("actions without an initial sensor value")

    @property
    def t(self) -> int:
        return len(self.sensors)

    def check(self, n_sensors: int, n_actions: int) -> None:
        if any(not 0 <= s < n_sensors for s in self.sensors):
            raise IndexOutOfRange(f"sensor value outside 0..{n_sensors - 1}")
        if any(not 0 <= a < n_actions for a in self.actions):
            raise IndexOutOfRange(f"action outside 0..{n_actions - 1}")


def init_history(s0: int) -> History:
    return History((s0,), ())


def memory_append(h: History, s: int, a: int) -> History:
    return History(h.sensors + (int(s),), h.actions + (int(a),))


def _check_index(value, size, what):
    if not 0 <= value < size:
        raise IndexOutOfRange(f"{what} {value} outside 0..{size - 1}")


def env_step(env: EnvironmentSpec, e: int, a: int, rng) -> tuple[int, int]:
    _check_index(e, env.n_states, "environment state")
    _check_index(a, env.n_actions, "action")
    e_next = sample_categorical(env.transition[a, e], rng)
    s_next = sample_categorical(env.sensor[e_next], rng)
    return e_next, s_next


@dataclass
class StepRecord:
    t: int
    e: int
    s: int
    a: int | None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    records: list

    @property
    def T(self) -> int:
        return len(self.records) - 1

    @property
    def history(self) -> History:
        """Memory after the final step (includes s_T and a_T)."""
        return History(tuple(r.s for r in self.records),
                       tuple(r.a for r in self.records[1:]))


AgentPolicy = Callable[[History], Sequence[float]]


def _query_agent(agent, h: History):
    act = getattr(agent, "act", agent)
    probs = act(h)
    diag = dict(getattr(agent, "diagnostics", None) or {})
    return probs, diag


def run_episode(env: EnvironmentSpec, agent: Any, T: int, seed) -> Trajectory:
    """Sample e_0, s_0, then T rounds of (a_t from memory, e_t, s_t).

    ``agent`` is a callable History -> distribution over actions, or an
    object with such an ``act`` method; an optional ``diagnostics`` dict on
    the object is copied into each step record.
    """
    if T < 1:
        raise ValueError("episode length must be at least 1")
    rng = make_rng(seed)
    e = sample_categorical(env.initial, rng)
    s = sample_categorical(env.sensor[e], rng)
    records = [StepRecord(0, e, s, None)]
    h = init_history(s)
    for t in range(1, T + 1):
        try:
            probs, diag = _query_agent(agent, h)
            p = categorical(probs, tol=1e-9)
            if p.shape != (env.n_actions,):
                raise ShapeMismatch(f"policy over {p.shape} but |A|={env.n_actions}")
        except Exception as exc:
            raise AgentStepError(t, exc) from exc
        a = sample_categorical(p, rng)
        e, s_next = env_step(env, e, a, rng)
        diag.setdefault("policy", p.tolist())
        records.append(StepRecord(t, e, s_next, a, diag))
        h = memory_append(h, s_next, a)
    return Trajectory(records)
