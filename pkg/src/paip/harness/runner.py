"""Seeded episode runs, JSON-lines logs, CSV summaries and action-value dumps.

Seeding rule: SeedSequence(seed).spawn(episodes) gives one child per
episode; each child spawns (environment, agent) streams.  Episodes are
independent, so a worker pool returns the same records as a serial run and
lines are written in episode order.
"""
from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..loop import History, run_episode
from ..selection import sequence_softmax
from .agents import build_agent
from .config import ExperimentConfig

log = logging.getLogger("paip.harness")

RECORD_FIELDS = ("episode", "t", "e", "s", "a", "policy", "value_top", "vfe", "iterations")
SUMMARY_FIELDS = ("episode", "steps", "actions", "value_top_sum", "vfe_trace", "iterations_total")


def encode(value) -> str:
    """JSON text with floats at 17 significant digits (non-finite -> null)."""
    if value is None or isinstance(value, (bool, str)):
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g") if math.isfinite(value) else "null"
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{encode(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(encode(v) for v in value) + "]"
    raise TypeError(f"cannot encode {type(value).__name__}")


def episode_streams(seed: int, episodes: int):
    """(env_seed, agent_seed) SeedSequences per episode."""
    return [tuple(child.spawn(2)) for child in np.random.SeedSequence(seed).spawn(episodes)]


def run_one(cfg: ExperimentConfig, k: int, env_ss, agent_ss) -> list:
    agent = build_agent(cfg, np.random.default_rng(agent_ss))
    traj = run_episode(cfg.environment, agent, cfg.run.T, np.random.default_rng(env_ss))
    out = []
    for r in traj.records:
        d = r.diagnostics
        out.append({"episode": k, "t": r.t, "e": r.e, "s": r.s, "a": r.a, "policy": d.get("policy"),
                    "value_top": d.get("value_top"), "vfe": d.get("vfe"), "iterations": d.get("iterations")})
    return out


def _run_one_packed(args):
    return run_one(*args)


def header(cfg: ExperimentConfig, seed: int) -> dict:
    return {"config_sha256": cfg.digest, "seed": seed, "version": __version__,
            "episodes": cfg.run.episodes, "T": cfg.run.T}


def run_records(cfg: ExperimentConfig, seed: int | None = None, workers: int | None = None):
    seed = cfg.run.seed if seed is None else seed
    jobs = [(cfg, k, e, a) for k, (e, a) in enumerate(episode_streams(seed, cfg.run.episodes))]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            episodes = list(pool.map(_run_one_packed, jobs))
    else:
        episodes = [run_one(*job) for job in jobs]
    return seed, episodes


def summary_from_log(lines) -> str:
    """Per-episode CSV derived only from the JSON-lines log."""
    rows = {}
    for line in list(lines)[1:]:
        rec = json.loads(line)
        rows.setdefault(rec["episode"], []).append(rec)
    buf = io.StringIO()
    buf.write(",".join(SUMMARY_FIELDS) + "\n")
    for k in sorted(rows):
        recs = [r for r in rows[k] if r["a"] is not None]
        values = [r["value_top"] for r in recs if r["value_top"] is not None]
        vfes = [r["vfe"] for r in recs if r["vfe"] is not None]
        iters = [r["iterations"] for r in recs if r["iterations"] is not None]
        buf.write(",".join([
            str(k), str(len(recs)), " ".join(str(r["a"]) for r in recs),
            encode(float(sum(values))) if values else "",
            " ".join(encode(float(v)) for v in vfes),
            str(sum(iters)) if iters else "",
        ]) + "\n")
    return buf.getvalue()


def summary_path(out_path) -> Path:
    return Path(out_path).with_suffix(".csv")


def run_command(cfg: ExperimentConfig, out_path, seed: int | None = None, workers: int | None = None) -> int:
    """Run all episodes; write the log to ``out_path`` and the summary next to it."""
    seed, episodes = run_records(cfg, seed, workers)
    lines = [encode(header(cfg, seed))]
    for recs in episodes:
        lines += [encode(r) for r in recs]
    text = "\n".join(lines) + "\n"
    out_path = Path(out_path)
    out_path.write_text(text)
    summary_path(out_path).write_text(summary_from_log(lines))
    log.info("wrote %d episodes to %s", len(episodes), out_path)
    return 0


def check_summary(log_path, csv_path=None) -> bool:
    """True when the CSV equals the summary re-derived from the log."""
    csv_path = summary_path(log_path) if csv_path is None else Path(csv_path)
    lines = Path(log_path).read_text().splitlines()
    return summary_from_log(lines) == Path(csv_path).read_text()


def parse_history(text: str) -> History:
    """Interleaved literal "s0,a1,s1,...": sensors at even, actions at odd positions."""
    items = [int(x) for x in text.replace(" ", "").split(",") if x != ""]
    if len(items) % 2 == 0:
        raise ValueError("history literal must start and end with a sensor value")
    return History(tuple(items[0::2]), tuple(items[1::2]))


def evaluate_command(cfg: ExperimentConfig, h: History) -> str:
    """CSV of (sequence, value) sorted by value, then the softmax first-action policy."""
    h.check(cfg.xi.n_sensors, cfg.xi.n_actions)
    agent = build_agent(cfg, np.random.default_rng(cfg.run.seed))
    seqs, values = agent.action_values(h)
    gamma = cfg.agent.selection.gamma
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    buf = io.StringIO()
    buf.write("sequence,value\n")
    for i in order:
        buf.write(f"{' '.join(str(int(a)) for a in seqs[i])},{encode(float(values[i]))}\n")
    policy = sequence_softmax(values, gamma).reshape(cfg.xi.n_actions, -1).sum(axis=1)
    buf.write(f"policy gamma={encode(float(gamma))},{' '.join(encode(float(p)) for p in policy)}\n")
    return buf.getvalue()
