"""Experiment configuration: parsing, validation and serialization.

A config is a YAML (or JSON) mapping::

    problem:  {builtin: sensors}          # or an explicit agent list
    graph:    {builtin: gossip, n: 3}      # or atoms with prob + matrix/edges
    noise:    {primal_cov: 0.1, dual_cov: 0.1, family: gaussian}
    schedule: {gamma0: 1.0, nu: 0.75}
    init:     {x: [...], lambda: [...]}    # optional, stacked, default zeros
    run:      {steps: 1000, replications: 1000, seed: 0, mode: normality,
               record_every: 0, alpha: 0.05, fit: false}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .engine import NoiseSpec, StepSchedule, SystemState
from .errors import ConfigError
from .network import GraphDistribution, graph_from_config, graph_to_config
from .problem import ProblemSpec, problem_from_config, problem_to_config

MODES = ("single-run", "montecarlo", "normality", "efficiency")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    problem: ProblemSpec
    graph: GraphDistribution
    noise: NoiseSpec
    schedule: StepSchedule
    steps: int = 1000
    replications: int = 1
    seed: int = 0
    mode: str = "single-run"
    record_every: int = 0
    alpha: float = 0.05
    fit: bool = False
    init: Optional[SystemState] = None
    out_dir: Optional[str] = None

    def initial_state(self) -> SystemState:
        if self.init is not None:
            return self.init
        return SystemState.zeros(self.problem.n, self.problem.m)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg

    def to_dict(self) -> dict:
        out = {
            "problem": problem_to_config(self.problem),
            "graph": graph_to_config(self.graph),
            "noise": self.noise.to_config(),
            "schedule": {"gamma0": self.schedule.gamma0, "nu": self.schedule.nu},
            "run": {
                "steps": self.steps,
                "replications": self.replications,
                "seed": self.seed,
                "mode": self.mode,
                "record_every": self.record_every,
                "alpha": self.alpha,
                "fit": self.fit,
            },
        }
        if self.init is not None:
            out["init"] = {"x": self.init.X.tolist(), "lambda": self.init.Lambda.tolist()}
        if self.out_dir is not None:
            out["run"]["out_dir"] = self.out_dir
        return out


def _int(value, path, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return int(value)


def validate(cfg: ExperimentConfig) -> None:
    p = cfg.problem
    if cfg.graph.n != p.n:
        raise ConfigError("graph", f"graph has {cfg.graph.n} agents but the problem has {p.n}")
    if cfg.noise.n != p.n or cfg.noise.m != p.m:
        raise ConfigError("noise", "noise dimensions do not match the problem")
    if cfg.mode not in MODES:
        raise ConfigError("run.mode", f"expected one of {MODES}")
    if cfg.replications < 1:
        raise ConfigError("run.replications", "must be >= 1")
    if cfg.steps < 1:
        raise ConfigError("run.steps", "must be >= 1")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("run.alpha", "must lie in (0, 1)")
    if cfg.mode in ("normality", "efficiency"):
        if not p.is_unconstrained:
            raise ConfigError("problem", f"{cfg.mode} mode needs every set to be the full space")
        if p.known_optimum is None:
            raise ConfigError("problem.optimum", f"{cfg.mode} mode needs a known optimum")
        if not cfg.schedule.normality_ready:
            raise ConfigError("schedule", f"{cfg.mode} mode needs gamma0 = 1 and nu in (2/3, 1)")
    if cfg.init is not None:
        if cfg.init.X.shape != (p.n * p.m,) or cfg.init.Lambda.shape != (p.n * p.m,):
            raise ConfigError("init", f"x and lambda must have length n*m = {p.n * p.m}")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "config root must be a mapping")
    unknown = set(raw) - {"problem", "graph", "noise", "schedule", "init", "run"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    if "problem" not in raw:
        raise ConfigError("problem", "missing")
    if "graph" not in raw:
        raise ConfigError("graph", "missing")
    problem = problem_from_config(raw["problem"], "problem")
    graph = graph_from_config(raw["graph"], "graph")
    noise = NoiseSpec.from_config(raw.get("noise"), problem.n, problem.m, "noise")
    scfg = raw.get("schedule", {}) or {}
    try:
        sched = StepSchedule(float(scfg.get("gamma0", 1.0)), float(scfg.get("nu", 0.75)))
    except (TypeError, ValueError) as exc:
        raise ConfigError("schedule", str(exc)) from None
    run = raw.get("run", {}) or {}
    if not isinstance(run, dict):
        raise ConfigError("run", "expected a mapping")
    init = None
    if raw.get("init") is not None:
        icfg = raw["init"]
        nm = problem.n * problem.m
        try:
            x = np.array(icfg.get("x", np.zeros(nm)), dtype=float).reshape(-1)
            lam = np.array(icfg.get("lambda", np.zeros(nm)), dtype=float).reshape(-1)
        except (TypeError, ValueError, AttributeError):
            raise ConfigError("init", "x and lambda must be numeric vectors") from None
        init = SystemState(1, x, lam)
    cfg = ExperimentConfig(
        problem=problem,
        graph=graph,
        noise=noise,
        schedule=sched,
        steps=_int(run.get("steps", 1000), "run.steps", 1),
        replications=_int(run.get("replications", 1), "run.replications", 1),
        seed=_int(run.get("seed", 0), "run.seed", 0),
        mode=str(run.get("mode", "single-run")),
        record_every=_int(run.get("record_every", 0), "run.record_every", 0),
        alpha=float(run.get("alpha", 0.05)),
        fit=bool(run.get("fit", False)),
        init=init,
        out_dir=run.get("out_dir"),
    )
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    return parse_config(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def sensor_config(steps: int = 1000, replications: int = 1000, seed: int = 0,
                       mode: str = "normality", fit: bool = False) -> ExperimentConfig:
    """The parameter-estimation experiment: 3 sensors, gossip, noise 0.1 I."""
    return parse_config({
        "problem": {"builtin": "sensors"},
        "graph": {"builtin": "gossip", "n": 3},
        "noise": {"primal_cov": 0.1, "dual_cov": 0.1},
        "schedule": {"gamma0": 1.0, "nu": 0.75},
        "run": {"steps": steps, "replications": replications, "seed": seed, "mode": mode, "fit": fit},
    })
