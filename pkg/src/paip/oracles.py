"""Brute-force reference computations.

These deliberately avoid the closed forms used by the main implementation:
parameter integrals are done on a midpoint grid, sums by explicit loops over
every history, and channel capacities by grid search over the input simplex.
They are only feasible on tiny instances.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import gammaln

from .errors import OracleInfeasible

GRID_STEP = 1e-3


def _beta_grid(step=GRID_STEP):
    x = np.arange(step / 2, 1.0, step)
    return x


def grid_row_integral(alpha, counts, step=GRID_STEP) -> float:
    """integral of prod theta_k^{counts_k} under Dir(alpha) for a 2-category row."""
    alpha = np.asarray(alpha, dtype=float)
    counts = np.asarray(counts)
    if alpha.shape != (2,):
        raise OracleInfeasible("grid integration implemented for binary rows only")
    if counts.sum() == 0:
        return 1.0
    if alpha.max() > 1e6:
        # near-point row: the density is a spike at the mean
        m = alpha / alpha.sum()
        return float(np.prod(m ** counts))
    if alpha.min() < 1:
        raise OracleInfeasible("grid integration needs concentrations >= 1")
    x = _beta_grid(step)
    log_dens = ((alpha[0] - 1) * np.log(x) + (alpha[1] - 1) * np.log1p(-x)
                - (gammaln(alpha[0]) + gammaln(alpha[1]) - gammaln(alpha.sum())))
    integrand = np.exp(log_dens + counts[0] * np.log(x) + counts[1] * np.log1p(-x))
    return float(integrand.sum() * step)


def grid_block_integral(alpha, counts, step=GRID_STEP) -> float:
    alpha = np.asarray(alpha, dtype=float)
    counts = np.asarray(counts)
    flat_a = alpha.reshape(-1, alpha.shape[-1])
    flat_c = counts.reshape(-1, counts.shape[-1])
    return float(np.prod([grid_row_integral(a, c, step) for a, c in zip(flat_a, flat_c)]))


def _count(states, sensors, actions, n_e, n_s, n_a):
    """Counts for a state/sensor sequence where actions[i] drives states[i] -> states[i+1]."""
    n1 = np.zeros((n_e, n_s), dtype=int)
    n2 = np.zeros((n_a, n_e, n_e), dtype=int)
    n3 = np.zeros(n_e, dtype=int)
    n3[states[0]] = 1
    for e, s in zip(states, sensors):
        n1[e, s] += 1
    for i, a in enumerate(actions):
        n2[a, states[i], states[i + 1]] += 1
    return n1, n2, n3


def grid_joint(states, sensors, actions, xi, step=GRID_STEP) -> float:
    """q(sensors, states | actions, xi) by grid integration over every row."""
    n1, n2, n3 = _count(states, sensors, actions, xi.n_states, xi.n_sensors, xi.n_actions)
    return (grid_block_integral(xi.xi1, n1, step) * grid_block_integral(xi.xi2, n2, step)
            * grid_block_integral(xi.xi3, n3, step))


def enumerate_posterior_weights(h, xi, step=GRID_STEP) -> np.ndarray:
    """Posterior over past state paths in lexicographic order."""
    w = np.array([grid_joint(path, h.sensors, h.actions, xi, step)
                  for path in itertools.product(range(xi.n_states), repeat=h.t)])
    return w / w.sum()


def enumerate_future_joint(h, xi, future_actions, step=GRID_STEP) -> np.ndarray:
    """q(s_{t:T}, e_{t:T} | a, history) as a (s..., e...) tensor, by grid integration
    of the joint over past and future together."""
    n_e, n_s = xi.n_states, xi.n_sensors
    L = len(future_actions)
    out = np.zeros((n_s,) * L + (n_e,) * L)
    actions = tuple(h.actions) + tuple(future_actions)
    for past in itertools.product(range(n_e), repeat=h.t):
        for fut in itertools.product(range(n_e), repeat=L):
            for sens in itertools.product(range(n_s), repeat=L):
                out[sens + fut] += grid_joint(past + fut, tuple(h.sensors) + sens, actions, xi, step)
    return out / out.sum()


def direct_future_joint_known(theta, e_prev_dist, actions) -> np.ndarray:
    """Known-parameter future joint by explicit loops."""
    n_e, n_s = theta.theta1.shape
    L = len(actions)
    out = np.zeros((n_s,) * L + (n_e,) * L)
    for e0 in range(n_e):
        for fut in itertools.product(range(n_e), repeat=L):
            for sens in itertools.product(range(n_s), repeat=L):
                p = e_prev_dist[e0]
                prev = e0
                for e, s, a in zip(fut, sens, actions):
                    p *= theta.theta2[a, prev, e] * theta.theta1[e, s]
                    prev = e
                out[sens + fut] += p
    return out


def capacity_grid_search(channel, step=GRID_STEP) -> float:
    """max_p I(X;Y) for a channel[x, y] with 2 or 3 inputs, by simplex grid search."""
    ch = np.asarray(channel, dtype=float)
    n_in = ch.shape[0]
    if n_in == 1:
        return 0.0
    if n_in == 2:
        p0 = np.arange(0.0, 1.0 + step / 2, step)
        inputs = np.stack([p0, 1 - p0], axis=1)
    elif n_in == 3:
        n = int(round(1 / step))
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        i, j = i[keep], j[keep]
        inputs = np.stack([i, j, n - i - j], axis=1) / n
    else:
        raise OracleInfeasible("grid search implemented for 2 or 3 inputs")
    py = inputs @ ch
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(ch > 0, np.log(ch) - np.log(np.where(py[:, None, :] > 0,
                                                                    py[:, None, :], 1.0)), 0.0)
    mi = np.einsum("nx,xy,nxy->n", inputs, ch, np.broadcast_to(log_ratio, (len(inputs),) + ch.shape))
    return float(mi.max())


def direct_mutual_information(joint) -> float:
    j = np.asarray(joint, dtype=float)
    px = j.sum(axis=1)
    py = j.sum(axis=0)
    total = 0.0
    for x in range(j.shape[0]):
        for y in range(j.shape[1]):
            if j[x, y] > 0:
                total += j[x, y] * math.log(j[x, y] / (px[x] * py[y]))
    return total
