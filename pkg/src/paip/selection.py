"""Action selection over action-sequence value functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .motivations import MotivationConfig, check_thompson_compatible, make_action_value
from .predictive import DEFAULT_CAP, enumerate_sequences
from .views import KnownThetaView

MODES = ("argmax", "softmax", "thompson")


@dataclass(frozen=True)
class SelectionConfig:
    mode: str = "argmax"
    gamma: float = 1.0
    tie_tol: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown selection mode {self.mode!r}; accepted: {', '.join(MODES)}")
        if self.mode == "softmax" and not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError("softmax needs a finite gamma > 0")


def q_table(Q, n_actions: int, cap: float = DEFAULT_CAP):
    """All action blocks (lexicographic) and their values."""
    seqs = enumerate_sequences(n_actions, Q.length, cap, "action sequences")
    values = np.array([Q(s) for s in seqs])
    return seqs, values


def argmax_index(values, tie_tol: float = 0.0) -> int:
    """First (lexicographically smallest) index within ``tie_tol`` of the maximum."""
    values = np.asarray(values)
    return int(np.flatnonzero(values >= values.max() - tie_tol)[0])


def argmax_select(Q, n_actions: int, cap: float = DEFAULT_CAP, tie_tol: float = 0.0):
    """Returns (first action, best action block)."""
    seqs, values = q_table(Q, n_actions, cap)
    i = argmax_index(values, tie_tol)
    return int(seqs[i][0]), tuple(int(a) for a in seqs[i])


def log_softmax(values, gamma: float) -> np.ndarray:
    logits = gamma * np.asarray(values, dtype=float)
    return logits - logsumexp(logits)


def sequence_softmax(values, gamma: float) -> np.ndarray:
    """exp(gamma * Q) normalized in the log domain."""
    return np.exp(log_softmax(values, gamma))


def first_action_marginal(seq_probs, n_actions: int) -> np.ndarray:
    p = np.asarray(seq_probs, dtype=float).reshape(n_actions, -1).sum(axis=1)
    return p / p.sum()


def softmax_policy(Q, gamma: float, n_actions: int, cap: float = DEFAULT_CAP) -> np.ndarray:
    """p(a_t) proportional to sum over later actions of exp(gamma * Q)."""
    if not (gamma > 0 and np.isfinite(gamma)):
        raise ValueError("gamma must be finite and positive")
    _, values = q_table(Q, n_actions, cap)
    logits = (gamma * values).reshape(n_actions, -1)
    per_first = logsumexp(logits, axis=1)
    return np.exp(per_first - logsumexp(per_first))


def thompson_select(factor, cfg: MotivationConfig, rng, model_length: int, n_actions: int,
                    cap: float = DEFAULT_CAP, tie_tol: float = 0.0):
    """Sample (e_{t-1}, theta) from ``factor`` and act greedily for that hypothesis.

    ``factor`` is anything with ``sample_hypothesis(rng)``: the exact
    posterior factor, a Dirichlet mixture or variational parameters.
    Returns (action, best block).
    """
    check_thompson_compatible(cfg)
    e_prev, theta = factor.sample_hypothesis(rng)
    view = KnownThetaView(theta, e_prev, cap, sampled=True)
    Q = make_action_value(view, cfg, model_length)
    return argmax_select(Q, n_actions, cap, tie_tol)
