"""Agents built from a config: inference + motivation + selection."""
from __future__ import annotations

import numpy as np

from ..active import act as active_marginal
from ..active import optimize, value_table
from ..errors import NonConvergence
from ..exact import complete_posterior, compute_posterior_factor
from ..loop import History
from ..motivations import make_action_value
from ..predictive import enumerate_sequences
from ..selection import argmax_index, q_table, softmax_policy, thompson_select
from ..variational import VariationalView, cavi_fit, vfe
from .config import ExperimentConfig


class ConfiguredAgent:
    """Maps a memory to a distribution over the next action.

    After each call ``diagnostics`` holds value_top, vfe and iterations
    (the latter two are None for exact inference).
    """

    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.diagnostics = {}

    @property
    def n_actions(self) -> int:
        return self.cfg.xi.n_actions

    def _fit(self, h: History):
        """Variational fit honouring the nonconvergence policy."""
        tol = self.cfg.tolerances
        try:
            return cavi_fit(h, self.cfg.xi, max_sweeps=tol["cavi_max_sweeps"], tol=tol["cavi_tol"])
        except NonConvergence as exc:
            if not tol["accept_nonconvergence"]:
                raise
            return exc.report.params, exc.report

    def view(self, h: History):
        """Complete-posterior view and fit diagnostics (vfe, iterations)."""
        a = self.cfg.agent
        if a.inference == "exact":
            return complete_posterior(h, self.cfg.xi, self.cfg.cap), None, None
        phi, rep = self._fit(h)
        return VariationalView(phi, self.cfg.cap, theta_atoms=a.theta_atoms), rep.vfe, rep.iterations

    def action_values(self, h: History):
        """(sequences, values) of the configured motivation at memory ``h``."""
        cfg = self.cfg
        length = cfg.horizon.length(h.t)
        if cfg.agent.inference == "active":
            phi = self._optimize(h, length)[0]
            seqs = enumerate_sequences(self.n_actions, cfg.agent.motivation.action_length(length), cfg.cap,
                                       "action sequences")
            return seqs, value_table(phi, cfg.agent.motivation, length, self.n_actions, cfg.cap)
        view, _, _ = self.view(h)
        return q_table(make_action_value(view, cfg.agent.motivation, length), self.n_actions, cfg.cap)

    def _optimize(self, h, length):
        cfg, tol = self.cfg, self.cfg.tolerances
        try:
            return optimize(h, cfg.xi, cfg.agent.motivation, length, gamma=cfg.agent.selection.gamma,
                            xi_gamma=cfg.agent.precision, tol=tol["active_tol"],
                            max_iter=tol["active_max_iter"], cavi_tol=tol["cavi_tol"], cap=cfg.cap)
        except NonConvergence as exc:
            if not tol["accept_nonconvergence"]:
                raise
            rep = exc.report
            return rep.phi, rep.phi_gamma, rep.pi, rep

    def act(self, h: History) -> np.ndarray:
        cfg = self.cfg
        sel = cfg.agent.selection
        length = cfg.horizon.length(h.t)
        n_a = self.n_actions
        if cfg.agent.inference == "active":
            phi, _, pi, rep = self._optimize(h, length)
            values = value_table(phi, cfg.agent.motivation, length, n_a, cfg.cap)
            marginal = active_marginal(pi, n_a)
            probs = marginal if sel.mode == "softmax" else np.eye(n_a)[argmax_index(marginal, sel.tie_tol)]
            self.diagnostics = {"policy": marginal.tolist(), "value_top": float(values.max()),
                                "vfe": float(vfe(phi, h, cfg.xi)), "iterations": int(rep.iterations)}
            return probs
        if sel.mode == "thompson":
            if cfg.agent.inference == "exact":
                factor, free_energy, iters = compute_posterior_factor(h, cfg.xi, cfg.cap), None, None
            else:
                factor, rep = self._fit(h)
                free_energy, iters = rep.vfe, rep.iterations
            a, _ = thompson_select(factor, cfg.agent.motivation, self.rng, length, n_a, cfg.cap, sel.tie_tol)
            probs = np.eye(n_a)[a]
            self.diagnostics = {"policy": probs.tolist(), "value_top": None, "vfe": free_energy,
                                "iterations": iters}
            return probs
        view, free_energy, iters = self.view(h)
        Q = make_action_value(view, cfg.agent.motivation, length)
        seqs, values = q_table(Q, n_a, cfg.cap)
        if sel.mode == "softmax":
            probs = softmax_policy(Q, sel.gamma, n_a, cfg.cap)
        else:
            probs = np.eye(n_a)[int(seqs[argmax_index(values, sel.tie_tol)][0])]
        self.diagnostics = {"policy": probs.tolist(), "value_top": float(values.max()),
                            "vfe": free_energy, "iterations": iters}
        return probs


def build_agent(cfg: ExperimentConfig, rng: np.random.Generator) -> ConfiguredAgent:
    return ConfiguredAgent(cfg, rng)
