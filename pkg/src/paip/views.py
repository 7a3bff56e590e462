"""Complete-posterior views beyond the exact and variational ones.

All views share the ``MixtureView`` query interface (``joint``, ``env_dist``,
``sensor_dist``, ``sensor_given_env``, ``atom_sensor_joint``,
``info_gain``), so motivations never need to know which inference scheme
produced them.
"""
from __future__ import annotations

import numpy as np

from .exact import ExactView, complete_posterior
from .model import ThetaPoint
from .predictive import DEFAULT_CAP, Components, MixtureView
from .variational import VariationalView

__all__ = ["MixtureView", "ExactView", "VariationalView", "KnownThetaView", "complete_posterior",
           "point_components"]


def point_components(thetas, weights, e_prev) -> Components:
    """One fixed-parameter component per theta; ``e_prev`` is (K, E) or (E,)."""
    thetas = list(thetas)
    k = len(thetas)
    n_e = thetas[0].theta1.shape[0]
    e_prev = np.asarray(e_prev, dtype=float)
    if e_prev.ndim == 1:
        e_prev = np.repeat(e_prev[None], k, axis=0)
    return Components(np.asarray(weights, dtype=float), e_prev.reshape(k, n_e),
                      np.stack([t.theta1 for t in thetas]), np.stack([t.theta2 for t in thetas]),
                      np.ones(k, bool), np.arange(k))


class KnownThetaView(MixtureView):
    """Predictives under a known parameter and a belief over e_{t-1}.

    Views built from a Thompson draw set ``sampled``: their parameter is a
    sample rather than a posterior, so information gain is refused.
    """

    def __init__(self, theta: ThetaPoint, e_prev, cap: float = DEFAULT_CAP, sampled: bool = False):
        self.theta = theta
        e_prev = np.asarray(e_prev)
        if e_prev.ndim == 0:
            e_prev = np.eye(theta.n_states)[int(e_prev)]
        super().__init__(point_components([theta], [1.0], e_prev), cap)
        self.supports_info_gain = not sampled
        self.sampled = sampled
