"""Intrinsic motivations and the action-value functions they induce.

Every function takes a posterior view and a future action block
a_{t:T}.  Values are in nats.  Sensor sequences and state paths are laid
out as in ``predictive``: a joint over a block of length L has shape
(|S|,)*L + (|E|,)*L.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HorizonTooShort, MotivationUnsupported, NonConvergence, ShapeMismatch
from .model import desired_schedule, smooth
from .predictive import enumerate_sequences
from .prob import kl_divergence, mutual_information, xlogy

KINDS = ("fep", "fep_friston2015", "empowerment", "predictive_info", "ksa", "extrinsic_only",
         "weighted_sum", "constant")

BA_TOL = 1e-9
BA_MAX_ITER = 1000


def _neg_cond_entropy(joint2d, env):
    """sum_{s,e} d(s,e) log d(s|e) for a (Q, P) joint and (P,) state marginal."""
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(env[None, :] > 0, joint2d / env[None, :], 0.0)
    return float(xlogy(joint2d, cond).sum())


def _step_joints(view, actions):
    """(s_tau, e_tau) joints for every tau in the block."""
    j = view.joint(actions)
    L = len(actions)
    out = []
    for tau in range(L):
        drop = tuple(i for i in range(2 * L) if i not in (tau, L + tau))
        out.append(j.sum(axis=drop))
    return out


def fep_entropy_term(view, actions, time_summed: bool = False) -> float:
    """-H(S_{t:T} | E_{t:T}, a), or its sum over single steps."""
    actions = tuple(actions)
    L = len(actions)
    if time_summed:
        return sum(_neg_cond_entropy(j, j.sum(axis=0)) for j in _step_joints(view, actions))
    j = view.joint(actions)
    n_s, n_e = view.n_sensors, view.n_states
    j2 = j.reshape(n_s ** L, n_e ** L)
    return _neg_cond_entropy(j2, j2.sum(axis=0))


def _sensor_marginals(dist, L):
    return [dist.sum(axis=tuple(i for i in range(L) if i != tau)) for tau in range(L)]


def extrinsic_kl_term(view, actions, p_d, time_summed: bool = False, smoothing: float = 0.0) -> float:
    """KL[d(S_{t:T} | a) || p^d], p^d a per-step distribution or schedule.

    ``smoothing`` mixes p^d with the uniform distribution first, which keeps
    the divergence finite for delta preferences.
    """
    actions = tuple(actions)
    L = len(actions)
    sched = smooth(desired_schedule(p_d, view.n_sensors, L), smoothing)
    dist = view.sensor_dist(actions)
    if time_summed:
        return sum(kl_divergence(m, sched[tau]) for tau, m in enumerate(_sensor_marginals(dist, L)))
    target = sched[0]
    for tau in range(1, L):
        target = np.multiply.outer(target, sched[tau])
    return kl_divergence(dist, np.asarray(target).reshape(dist.shape))


def info_gain(view, actions, subset=None, time_summed: bool = False) -> float:
    """I(S_{t:T} : Theta | a) over the view's discrete parameter atoms."""
    actions = tuple(actions)
    L = len(actions)
    joint = view.atom_sensor_joint(actions, subset)
    if not time_summed:
        return mutual_information(joint)
    k = joint.shape[0]
    full = joint.reshape((k,) + (view.n_sensors,) * L)
    total = 0.0
    for tau in range(L):
        drop = tuple(1 + i for i in range(L) if i != tau)
        total += mutual_information(full.sum(axis=drop))
    return total


def ksa_value(view, actions) -> float:
    return info_gain(view, actions, None)


def fep_value(view, actions, p_d=None, use_info_gain: bool = False, subset=None,
              time_summed: bool = False, smoothing: float = 0.0) -> float:
    value = fep_entropy_term(view, actions, time_summed)
    if use_info_gain:
        value += info_gain(view, actions, subset, time_summed)
    if p_d is not None:
        value -= extrinsic_kl_term(view, actions, p_d, time_summed, smoothing)
    return value


def friston2015_value(A, B, C, s_prev, actions) -> float:
    """Matrix form of the time-summed expected free energy with a desired prior.

    ``A[s, e]`` and ``B[a][e', e]`` are column-stochastic; ``C`` is a single
    desired sensor distribution or one row per step.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    s_bar = np.asarray(s_prev, dtype=float)
    n_s, n_e = A.shape
    if B.ndim != 3 or B.shape[1:] != (n_e, n_e) or s_bar.shape != (n_e,):
        raise ShapeMismatch("A, B and the state belief disagree on |E|")
    L = len(actions)
    C = np.asarray(C, dtype=float)
    C = np.broadcast_to(C, (L, n_s)) if C.ndim == 1 else C
    if C.shape[0] < L or C.shape[1] != n_s:
        raise ShapeMismatch("desired prior schedule too short or wrong width")
    ambiguity = np.ones(n_s) @ xlogy(A, A)
    value = 0.0
    for tau, a in enumerate(actions):
        s_bar = B[a] @ s_bar
        o = A @ s_bar
        value += float(ambiguity @ s_bar) - float(xlogy(o, o).sum() - xlogy(o, C[tau]).sum())
    return value


def blahut_arimoto(channel, tol: float = BA_TOL, max_iter: int = BA_MAX_ITER):
    """Capacity of a discrete memoryless channel[x, y].

    Iterates until the gap between the standard upper and lower capacity
    bounds is below ``tol``.  Returns (capacity, input distribution).
    """
    W = np.asarray(channel, dtype=float)
    n_x = W.shape[0]
    p = np.full(n_x, 1.0 / n_x)
    lower = upper = 0.0
    for _ in range(max_iter):
        q = p @ W
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.where(W > 0, np.log(W) - np.log(np.where(q > 0, q, 1.0))[None, :], 0.0)
        D = (W * log_ratio).sum(axis=1)
        c = np.exp(D - D.max())
        lower = float(np.log((p * c).sum()) + D.max())
        upper = float(D.max())
        if upper - lower < tol:
            return max(lower, 0.0), p
        p = p * c
        p /= p.sum()
    raise NonConvergence(f"Blahut-Arimoto gap {upper - lower:.3g} after {max_iter} iterations",
                         {"lower": lower, "upper": upper, "input": p})


def empowerment_channel(view, prefix, m: int) -> np.ndarray:
    """Rows: suffix action blocks of length m (lexicographic); columns: final sensor."""
    prefix = tuple(prefix)
    suffixes = enumerate_sequences(view.n_actions, m, view.cap, "empowerment suffixes")
    rows = []
    L = len(prefix) + m
    for suf in suffixes:
        dist = view.sensor_dist(prefix + tuple(int(a) for a in suf))
        rows.append(dist.sum(axis=tuple(range(L - 1))))
    return np.asarray(rows)


def empowerment_value(view, prefix, n: int, m: int, tol: float = BA_TOL,
                      max_iter: int = BA_MAX_ITER) -> float:
    """Channel capacity from a_{t+n+1:t+n+m} to s_{t+n+m} given the prefix a_{t:t+n}."""
    if m < 1:
        raise HorizonTooShort("empowerment needs m >= 1 suffix actions")
    if len(prefix) != n + 1:
        raise ShapeMismatch(f"empowerment prefix must have n+1 = {n + 1} actions")
    cap, _ = blahut_arimoto(empowerment_channel(view, prefix, m), tol, max_iter)
    return cap


def predictive_information_value(view, actions) -> float:
    """I(S_{t:t+k-1} : S_{t+k:t+2k-1} | a) with k = floor(L / 2)."""
    actions = tuple(actions)
    L = len(actions)
    k = L // 2
    if k == 0:
        raise HorizonTooShort("predictive information needs at least two future steps")
    dist = view.sensor_dist(actions)
    if L > 2 * k:
        dist = dist.sum(axis=tuple(range(2 * k, L)))
    n = view.n_sensors ** k
    return mutual_information(dist.reshape(n, n))


@dataclass
class MotivationConfig:
    kind: str = "fep"
    desired: object = None          # per-step distribution or schedule over S
    smoothing: float = 0.0
    info_gain: bool = False
    theta_subset: tuple = None
    time_summed: bool = False
    n: int = 0
    m: int = 1
    value: float = 0.0              # for kind == "constant"
    terms: list = field(default_factory=list)   # [(weight, MotivationConfig)] for weighted_sum

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown motivation kind {self.kind!r}; accepted: {', '.join(KINDS)}")
        if self.kind == "fep_friston2015" and self.desired is None:
            raise ValueError("fep_friston2015 needs a desired prior")
        if self.kind == "extrinsic_only" and self.desired is None:
            raise ValueError("extrinsic_only needs a desired prior")
        for w, _ in self.terms:
            if not np.isfinite(w):
                raise ValueError("weighted_sum weights must be finite")

    def action_length(self, model_length: int) -> int:
        """Length of the action block the value function is defined on."""
        if self.kind == "empowerment":
            return self.n + 1
        if self.kind == "weighted_sum":
            lengths = {c.action_length(model_length) for _, c in self.terms}
            if len(lengths) > 1:
                raise ValueError("weighted_sum terms disagree on the action horizon")
            return lengths.pop() if lengths else model_length
        return model_length

    def needs_parameter_posterior(self) -> bool:
        if self.kind == "ksa" or (self.kind == "fep" and self.info_gain):
            return True
        return any(c.needs_parameter_posterior() for _, c in self.terms)


@dataclass
class ActionValueFn:
    length: int
    evaluate: Callable
    cache: dict = field(default_factory=dict)

    def __call__(self, actions) -> float:
        key = tuple(int(a) for a in actions)
        if len(key) != self.length:
            raise ShapeMismatch(f"action block of length {len(key)}, expected {self.length}")
        if key not in self.cache:
            self.cache[key] = float(self.evaluate(key))
        return self.cache[key]


def _evaluator(view, cfg: MotivationConfig):
    k = cfg.kind
    if k == "fep":
        return lambda a: fep_value(view, a, cfg.desired, cfg.info_gain, cfg.theta_subset,
                                   cfg.time_summed, cfg.smoothing)
    if k == "fep_friston2015":
        return lambda a: fep_value(view, a, cfg.desired, False, None, True, cfg.smoothing)
    if k == "extrinsic_only":
        return lambda a: -extrinsic_kl_term(view, a, cfg.desired, cfg.time_summed, cfg.smoothing)
    if k == "ksa":
        return lambda a: ksa_value(view, a)
    if k == "predictive_info":
        return lambda a: predictive_information_value(view, a)
    if k == "empowerment":
        return lambda a: empowerment_value(view, a, cfg.n, cfg.m)
    if k == "constant":
        return lambda a: cfg.value
    parts = [(w, _evaluator(view, c)) for w, c in cfg.terms]
    return lambda a: sum(w * f(a) for w, f in parts)


def make_action_value(view, cfg: MotivationConfig, model_length: int) -> ActionValueFn:
    """Bind a motivation to a view; ``model_length`` is T_hat - t + 1."""
    return ActionValueFn(cfg.action_length(model_length), _evaluator(view, cfg))


def check_thompson_compatible(cfg: MotivationConfig) -> None:
    if cfg.needs_parameter_posterior():
        raise MotivationUnsupported(
            f"motivation {cfg.kind!r} evaluates the parameter posterior; Thompson sampling cannot")
