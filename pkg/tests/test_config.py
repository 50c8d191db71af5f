import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from dpdsa.config import dump_config, load_config, parse_config, sensor_config
from dpdsa.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def base():
    return {
        "problem": {"builtin": "sensors"},
        "graph": {"builtin": "gossip", "n": 3},
        "noise": {"primal_cov": 0.1, "dual_cov": 0.1},
        "schedule": {"gamma0": 1.0, "nu": 0.75},
        "run": {"steps": 10, "replications": 2, "seed": 1, "mode": "normality"},
    }


@pytest.mark.parametrize("name", ["sensors.yaml", "box_ring.yaml"])
def test_round_trip(name):
    cfg = load_config(CONFIGS / name)
    d1 = cfg.to_dict()
    d2 = parse_config(json.loads(dump_config(cfg))).to_dict()
    assert d1 == d2


def test_builtin_matches_helper():
    a = load_config(CONFIGS / "sensors.yaml").to_dict()
    b = sensor_config(steps=a["run"]["steps"], replications=a["run"]["replications"],
                           seed=a["run"]["seed"], mode=a["run"]["mode"], fit=a["run"]["fit"]).to_dict()
    assert a["problem"] == b["problem"] and a["graph"] == b["graph"] and a["noise"] == b["noise"]


def test_round_trip_with_init():
    raw = base()
    raw["init"] = {"x": list(np.arange(9.0)), "lambda": [0.5] * 9}
    raw["run"]["mode"] = "single-run"
    cfg = parse_config(raw)
    assert parse_config(cfg.to_dict()).to_dict() == cfg.to_dict()


def edit(path, value):
    raw = base()
    node = raw
    keys = path.split(".")
    for k in keys[:-1]:
        node = node[k]
    if value is None:
        del node[keys[-1]]
    else:
        node[keys[-1]] = value
    return raw


@pytest.mark.parametrize("path,value,where", [
    ("run.replications", 0, "run.replications"),
    ("run.steps", "many", "run.steps"),
    ("run.mode", "sweep", "run.mode"),
    ("run.alpha", 1.5, "run.alpha"),
    ("schedule.nu", 0.4, "schedule"),
    ("schedule.nu", 0.6, "schedule"),
    ("graph.n", 4, "graph"),
    ("problem.builtin", "other", "problem.builtin"),
    ("noise.primal_cov", [1.0, 2.0], "noise"),
    ("problem", None, "problem"),
])
def test_error_paths(path, value, where):
    with pytest.raises(ConfigError) as e:
        parse_config(edit(path, value))
    assert e.value.path == where


def test_normality_needs_unconstrained():
    raw = yaml.safe_load((CONFIGS / "box_ring.yaml").read_text())
    raw["run"]["mode"] = "normality"
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert e.value.path == "problem"


def test_unknown_top_level_key():
    raw = base()
    raw["extra"] = 1
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert e.value.path == "extra"


def test_bad_agent_field():
    raw = base()
    raw["problem"] = {"agents": [{"cost": {"matrix": 1.0}}], "m": 1}
    raw["graph"] = {"n": 1, "atoms": [{"prob": 1.0, "edges": []}]}
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert e.value.path == "problem.agents[0].cost.center"
