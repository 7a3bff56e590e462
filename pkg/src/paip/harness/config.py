"""Experiment configuration: JSON parsing and whole-document validation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..active import OUTER_MAX_ITER, OUTER_TOL, PrecisionParams
from ..errors import ParseError, ValidationError
from ..loop import EnvironmentSpec
from ..model import HorizonRule, HyperParams, ThetaPoint
from ..motivations import KINDS, MotivationConfig
from ..predictive import DEFAULT_CAP
from ..selection import MODES, SelectionConfig
from ..url import EnvClass, PomdpComponent
from ..variational import DEFAULT_MAX_SWEEPS, DEFAULT_TOL
from .envs import BUILTINS

INFERENCE = ("exact", "variational", "active")
ROW_TOL = 1e-9
SECTIONS = ("environment", "model", "agent", "run", "caps", "tolerances", "oracle", "env_class")

DEFAULT_TOLERANCES = {
    "cavi_tol": DEFAULT_TOL,
    "cavi_max_sweeps": DEFAULT_MAX_SWEEPS,
    "active_tol": OUTER_TOL,
    "active_max_iter": OUTER_MAX_ITER,
    "accept_nonconvergence": False,
}


@dataclass
class AgentConfig:
    inference: str
    motivation: MotivationConfig
    selection: SelectionConfig
    precision: PrecisionParams | None = None
    theta_atoms: int = 0


@dataclass
class RunConfig:
    T: int
    episodes: int
    seed: int


@dataclass
class ExperimentConfig:
    environment: EnvironmentSpec
    xi: HyperParams
    horizon: HorizonRule
    agent: AgentConfig
    run: RunConfig
    cap: float = DEFAULT_CAP
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    oracle_checks: list | None = None
    env_class: EnvClass | None = None
    digest: str = ""
    source: str = ""


class _Checker:
    """Collects (path, message) violations instead of stopping at the first."""

    def __init__(self):
        self.violations = []

    def fail(self, path, msg):
        self.violations.append((path, msg))
        return None

    def get(self, obj, key, path, kind=None, required=True, default=None):
        if not isinstance(obj, dict):
            return default
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}", "missing")
            return default
        value = obj[key]
        if kind is not None and not _is(value, kind):
            return self.fail(f"{path}.{key}", f"expected {kind}, got {type(value).__name__}")
        return value

    def table(self, value, path, ndim):
        if value is None:
            return self.fail(path, "missing")
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            return self.fail(path, "not a rectangular array of numbers")
        if arr.ndim != ndim:
            return self.fail(path, f"expected {ndim}-d array, got {arr.ndim}-d")
        if not np.all(np.isfinite(arr)):
            return self.fail(path, "non-finite entries")
        return arr

    def stochastic(self, value, path, ndim):
        arr = self.table(value, path, ndim)
        if arr is None:
            return None
        ok = True
        if np.any(arr < 0):
            self.fail(path, "negative probabilities")
            ok = False
        sums = arr.sum(axis=-1)
        for idx in np.argwhere(np.atleast_1d(np.abs(sums - 1.0) > ROW_TOL)):
            where = "".join(f"[{i}]" for i in idx) if sums.ndim else ""
            self.fail(f"{path}{where}", f"row sums to {float(sums[tuple(idx)] if sums.ndim else sums):.6g}, expected 1")
            ok = False
        return arr if ok else None

    def positive(self, value, path, ndim):
        arr = self.table(value, path, ndim)
        if arr is not None and np.any(arr <= 0):
            return self.fail(path, "Dirichlet parameters must be positive")
        return arr


def _is(value, kind):
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "object":
        return isinstance(value, dict)
    if kind == "array":
        return isinstance(value, list)
    if kind == "string":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    raise ValueError(kind)


def _environment(c: _Checker, doc, path):
    if not isinstance(doc, dict):
        return c.fail(path, "expected object")
    if "builtin" in doc:
        name = doc["builtin"]
        if name not in BUILTINS:
            return c.fail(f"{path}.builtin", f"unknown builtin {name!r}; accepted: {', '.join(BUILTINS)}")
        params = c.get(doc, "params", path, "object", required=False, default={})
        try:
            return BUILTINS[name](**(params or {}))
        except (TypeError, ValueError) as exc:
            return c.fail(f"{path}.params", str(exc))
    init = c.stochastic(doc.get("initial"), f"{path}.initial", 1)
    trans = c.stochastic(doc.get("transition"), f"{path}.transition", 3)
    sens = c.stochastic(doc.get("sensor"), f"{path}.sensor", 2)
    if init is None or trans is None or sens is None:
        return None
    n = init.shape[0]
    if trans.shape[1:] != (n, n):
        return c.fail(f"{path}.transition", f"shape {trans.shape} does not match {n} states")
    if sens.shape[0] != n:
        return c.fail(f"{path}.sensor", f"shape {sens.shape} does not match {n} states")
    return EnvironmentSpec(init, trans, sens)


def _model(c: _Checker, doc, env, path):
    if not isinstance(doc, dict):
        c.fail(path, "expected object")
        return None, None
    horizon = None
    hdoc = c.get(doc, "horizon", path, "object", required=False, default={"kind": "sliding", "value": 0})
    if hdoc is not None:
        kind = hdoc.get("kind", "sliding")
        value = hdoc.get("value", 0)
        if kind not in ("fixed", "sliding"):
            c.fail(f"{path}.horizon.kind", f"unknown rule {kind!r}; accepted: fixed, sliding")
        elif not _is(value, "int") or value < 0:
            c.fail(f"{path}.horizon.value", "expected a non-negative integer")
        else:
            horizon = HorizonRule(kind, value)
    if env is None:
        return None, horizon
    n_e = c.get(doc, "n_states", path, "int", required=False, default=env.n_states)
    if n_e is None or n_e < 1:
        c.fail(f"{path}.n_states", "expected a positive integer")
        return None, horizon
    n_s, n_a = env.n_sensors, env.n_actions
    xdoc = c.get(doc, "xi", path, "object", required=False, default={"kind": "uniform"})
    if xdoc is None:
        return None, horizon
    kind = xdoc.get("kind", "uniform")
    conc = xdoc.get("concentration", 1.0 if kind == "uniform" else 1e12)
    if not _is(conc, "number") or not conc > 0:
        c.fail(f"{path}.xi.concentration", "expected a positive number")
        return None, horizon
    if kind == "uniform":
        return HyperParams.uniform(n_e, n_s, n_a, conc), horizon
    if kind == "environment":
        if n_e != env.n_states:
            c.fail(f"{path}.n_states", "xi kind 'environment' needs n_states equal to the environment's")
            return None, horizon
        return HyperParams.from_theta(ThetaPoint.from_env(env), conc), horizon
    if kind == "explicit":
        xi1 = c.positive(xdoc.get("xi1"), f"{path}.xi.xi1", 2)
        xi2 = c.positive(xdoc.get("xi2"), f"{path}.xi.xi2", 3)
        xi3 = c.positive(xdoc.get("xi3"), f"{path}.xi.xi3", 1)
        shapes = {"xi1": (n_e, n_s), "xi2": (n_a, n_e, n_e), "xi3": (n_e,)}
        ok = True
        for name, arr in zip(("xi1", "xi2", "xi3"), (xi1, xi2, xi3)):
            if arr is None:
                ok = False
            elif arr.shape != shapes[name]:
                c.fail(f"{path}.xi.{name}", f"shape {arr.shape}, expected {shapes[name]}")
                ok = False
        return (HyperParams(xi1, xi2, xi3) if ok else None), horizon
    c.fail(f"{path}.xi.kind", f"unknown kind {kind!r}; accepted: uniform, environment, explicit")
    return None, horizon


def _motivation(c: _Checker, doc, n_s, path):
    if not isinstance(doc, dict):
        return c.fail(path, "expected object")
    kind = doc.get("kind", "fep")
    if kind not in KINDS:
        return c.fail(f"{path}.kind", f"unknown motivation kind {kind!r}; accepted: {', '.join(KINDS)}")
    desired = doc.get("desired")
    if desired is not None:
        arr = c.table(desired, f"{path}.desired", np.ndim(desired))
        if arr is None:
            return None
        if arr.ndim not in (1, 2) or arr.shape[-1] != n_s:
            return c.fail(f"{path}.desired", f"expected distribution(s) over {n_s} sensor values")
        if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1) > ROW_TOL):
            return c.fail(f"{path}.desired", "rows must be probability distributions")
        desired = arr
    terms = []
    for i, term in enumerate(doc.get("terms", [])):
        tpath = f"{path}.terms[{i}]"
        w = c.get(term, "weight", tpath, "number")
        sub = _motivation(c, c.get(term, "motivation", tpath, "object"), n_s, f"{tpath}.motivation")
        if w is not None and sub is not None:
            terms.append((float(w), sub))
    subset = doc.get("theta_subset")
    try:
        return MotivationConfig(kind=kind, desired=desired, smoothing=float(doc.get("smoothing", 0.0)),
                                info_gain=bool(doc.get("info_gain", False)),
                                theta_subset=tuple(subset) if subset is not None else None,
                                time_summed=bool(doc.get("time_summed", False)),
                                n=int(doc.get("n", 0)), m=int(doc.get("m", 1)),
                                value=float(doc.get("value", 0.0)), terms=terms)
    except (TypeError, ValueError) as exc:
        return c.fail(path, str(exc))


def _agent(c: _Checker, doc, n_s, path):
    if not isinstance(doc, dict):
        return c.fail(path, "expected object")
    inference = c.get(doc, "inference", path, "string")
    if inference is not None and inference not in INFERENCE:
        c.fail(f"{path}.inference", f"unknown inference {inference!r}; accepted: {', '.join(INFERENCE)}")
        inference = None
    motivation = _motivation(c, c.get(doc, "motivation", path, "object"), n_s, f"{path}.motivation")
    sdoc = c.get(doc, "selection", path, "object", required=False, default={})
    selection = None
    if sdoc is not None:
        mode = sdoc.get("mode", "argmax")
        if mode not in MODES:
            c.fail(f"{path}.selection.mode", f"unknown mode {mode!r}; accepted: {', '.join(MODES)}")
        else:
            try:
                selection = SelectionConfig(mode, float(sdoc.get("gamma", 1.0)), float(sdoc.get("tie_tol", 0.0)))
            except (TypeError, ValueError) as exc:
                c.fail(f"{path}.selection", str(exc))
    precision = None
    pdoc = c.get(doc, "precision", path, "object", required=False)
    if pdoc is not None:
        if inference != "active":
            c.fail(f"{path}.precision", "a precision prior needs inference 'active'")
        try:
            precision = PrecisionParams(float(pdoc["shape"]), float(pdoc["rate"]))
        except (KeyError, TypeError, ValueError) as exc:
            c.fail(f"{path}.precision", f"expected positive shape and rate ({exc})")
    atoms = c.get(doc, "theta_atoms", path, "int", required=False, default=0)
    if selection is not None and selection.mode == "thompson":
        if inference == "active":
            c.fail(f"{path}.selection.mode", "thompson selection is not available for inference 'active'")
        if motivation is not None and motivation.needs_parameter_posterior():
            c.fail(f"{path}.selection.mode", "thompson selection cannot use info-gain or ksa motivations")
    if None in (inference, motivation, selection):
        return None
    return AgentConfig(inference, motivation, selection, precision, atoms or 0)


def _run(c: _Checker, doc, path):
    if not isinstance(doc, dict):
        return c.fail(path, "expected object")
    T = c.get(doc, "T", path, "int")
    episodes = c.get(doc, "episodes", path, "int", required=False, default=1)
    seed = c.get(doc, "seed", path, "int", required=False, default=0)
    if T is not None and T < 1:
        c.fail(f"{path}.T", "must be at least 1")
        T = None
    if episodes is not None and episodes < 0:
        c.fail(f"{path}.episodes", "must be non-negative")
        episodes = None
    if seed is not None and not 0 <= seed < 2 ** 64:
        c.fail(f"{path}.seed", "must be an unsigned 64-bit integer")
        seed = None
    if None in (T, episodes, seed):
        return None
    return RunConfig(T, episodes, seed)


def _env_class(c: _Checker, doc, path):
    if not isinstance(doc, dict):
        return c.fail(path, "expected object")
    comps = []
    for i, cdoc in enumerate(c.get(doc, "components", path, "array", default=[]) or []):
        env = _environment(c, cdoc, f"{path}.components[{i}]")
        if env is not None:
            comps.append(PomdpComponent(env))
    weights = c.stochastic(doc.get("weights"), f"{path}.weights", 1)
    if weights is None or len(comps) != len(doc.get("components", [])):
        return None
    if len(comps) != weights.shape[0]:
        return c.fail(f"{path}.weights", f"{weights.shape[0]} weights for {len(comps)} components")
    try:
        return EnvClass(tuple(comps), weights)
    except ValueError as exc:
        return c.fail(path, str(exc))


def validate(doc, source: str = "", digest: str = "") -> ExperimentConfig:
    """Build an ExperimentConfig or raise ValidationError listing every violation."""
    c = _Checker()
    if not isinstance(doc, dict):
        raise ValidationError([("$", "top level must be an object")])
    for key in doc:
        if key not in SECTIONS:
            c.fail(key, f"unknown section; accepted: {', '.join(SECTIONS)}")
    env = _environment(c, c.get(doc, "environment", "$", "object"), "environment")
    xi, horizon = _model(c, c.get(doc, "model", "$", "object", required=False, default={}), env, "model")
    agent = _agent(c, c.get(doc, "agent", "$", "object"), env.n_sensors if env else 0, "agent")
    run = _run(c, c.get(doc, "run", "$", "object"), "run")
    caps = c.get(doc, "caps", "$", "object", required=False, default={}) or {}
    cap = caps.get("complexity", DEFAULT_CAP)
    if not _is(cap, "number") or not cap >= 1:
        c.fail("caps.complexity", "expected a number >= 1")
    tol = dict(DEFAULT_TOLERANCES)
    for key, value in (c.get(doc, "tolerances", "$", "object", required=False, default={}) or {}).items():
        if key not in DEFAULT_TOLERANCES:
            c.fail(f"tolerances.{key}", f"unknown tolerance; accepted: {', '.join(DEFAULT_TOLERANCES)}")
        elif not isinstance(value, type(DEFAULT_TOLERANCES[key])) and not (
                isinstance(DEFAULT_TOLERANCES[key], float) and _is(value, "number")):
            c.fail(f"tolerances.{key}", f"expected {type(DEFAULT_TOLERANCES[key]).__name__}")
        else:
            tol[key] = value
    checks = None
    odoc = c.get(doc, "oracle", "$", "object", required=False)
    if odoc is not None:
        checks = c.get(odoc, "checks", "oracle", "array")
    env_class = None
    if "env_class" in doc:
        env_class = _env_class(c, doc["env_class"], "env_class")
    if c.violations:
        raise ValidationError(c.violations)
    return ExperimentConfig(env, xi, horizon, agent, run, float(cap), tol, checks, env_class, digest, source)


def parse_config(text: str | bytes, source: str = "<string>") -> ExperimentConfig:
    raw = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    digest = hashlib.sha256(raw).hexdigest()
    try:
        decoded = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise ParseError(f"{source}: not valid UTF-8", line, exc.start - raw.rfind(b"\n", 0, exc.start)) from exc
    try:
        doc = json.loads(decoded)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc.msg}", exc.lineno, exc.colno) from exc
    return validate(doc, source, digest)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_bytes(), str(path))
