"""Experiment configuration: a sectioned ``key = value`` text format.

Example::

    [experiment]
    agent = div-dqn
    budget = 200000
    seeds = 0, 1, 2

    [env]
    kind = grid
    size = 50
    reward_mode = sparse

    [train]
    lr = 0.001

    [diversity]
    alpha_mode = distance
    alpha0 = 0.1

Sections and keys are fixed; unknown ones are rejected. Unset keys take
the documented defaults below (some depend on the agent family).
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

AGENTS = ("dqn", "div-dqn", "ddpg", "div-ddpg", "a2c", "div-a2c")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: Optional[int] = None):
        self.key, self.line = key, line
        where = f" (line {line})" if line else ""
        super().__init__(f"{key}: {message}{where}")


def _int(s):
    return int(s)


def _float(s):
    v = float(s)
    if v != v or v in (float("inf"), float("-inf")):
        raise ValueError("must be finite")
    return v


def _str(s):
    return s.strip()


def _int_list(s):
    if isinstance(s, (list, tuple)):
        return [int(x) for x in s]
    parts = [p for p in re.split(r"[,\s]+", s.strip()) if p]
    return [int(p) for p in parts]


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(str(x) for x in v)
    return str(v)


# key -> (parser, default). ``None`` defaults are filled per agent/env below.
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "name": (_str, None),
        "agent": (_str, None),
        "budget": (_int, None),
        "seeds": (_int_list, [0, 1, 2]),
        "output": (_str, None),
        "trace_every": (_int, 0),
    },
    "env": {
        "kind": (_str, "grid"),
        "size": (_int, None),
        "width": (_int, None),
        "height": (_int, None),
        "reward_mode": (_str, "sparse"),
        "deceptive_reward": (_float, 0.001),
        "goal_reward": (_float, 1.0),
        "horizon": (_int, None),
        "half_width": (_float, 1.0),
        "action_bound": (_float, 0.05),
        "threshold": (_float, 0.05),
        "target_radius": (_float, 0.6),
        "target_seed": (_int, 0),
    },
    "train": {
        "hidden": (_int_list, [64, 64]),
        "optimizer": (_str, "adam"),
        "lr": (_float, None),
        "gamma": (_float, 0.99),
        "batch_size": (_int, None),
        "buffer_capacity": (_int, 100_000),
        "learning_starts": (_int, None),
        "train_freq": (_int, 1),
        "target_sync": (_int, 500),
        "eps_start": (_float, 1.0),
        "eps_end": (_float, 0.05),
        "eps_fraction": (_float, 0.1),
        "actor_lr": (_float, 1e-3),
        "critic_lr": (_float, 1e-3),
        "tau": (_float, 0.005),
        "noise": (_str, "ou"),
        "ou_theta": (_float, 0.15),
        "ou_sigma": (_float, 0.2),
        "gauss_sigma": (_float, 0.1),
        "entropy_coef": (_float, 0.01),
        "value_coef": (_float, 0.5),
        "rollout_len": (_int, 5),
        "workers": (_int, 4),
        "snapshot_every": (_int, 20),
    },
    "diversity": {
        "alpha_mode": (_str, None),
        "alpha0": (_float, 0.1),
        "delta": (_float, None),
        "alpha_min": (_float, 1e-4),
        "alpha_max": (_float, 1.0),
        "clip": (_float, 10.0),
        "perf_mode": (_str, "reactive"),
    },
}

_DEFAULT_BUDGET = {"grid": 200_000, "pointmass": 30_000}


def family(agent: str) -> str:
    return agent.replace("div-", "")


@dataclass
class ExperimentConfig:
    name: str
    agent: str
    budget: int
    seeds: list
    output: str
    trace_every: int = 0
    env: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    diversity: dict = field(default_factory=dict)

    @property
    def is_div(self) -> bool:
        return self.agent.startswith("div-")

    def to_text(self) -> str:
        lines = ["[experiment]"]
        for k in ("name", "agent", "budget", "seeds", "output", "trace_every"):
            lines.append(f"{k} = {_fmt(getattr(self, k))}")
        for sec in ("env", "train", "diversity"):
            lines.append("")
            lines.append(f"[{sec}]")
            for k, v in getattr(self, sec).items():
                lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return validate(ExperimentConfig(**d))


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    cur = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def parse_config(source) -> ExperimentConfig:
    """Parse a config from a path or from text; raises ConfigError."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "[" not in source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError("config", f"cannot read {path}: {e}") from e
    else:
        text = str(source)
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        raise ConfigError("config", f"malformed: {e.message if hasattr(e, 'message') else e}".splitlines()[0], line) from e

    raw: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section", _line_of(text, sec, None))
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key", _line_of(text, sec, key))
            parser = SCHEMA[sec][key][0]
            if val is None or not val.strip():
                if sec == "experiment" and key == "agent":
                    raise ConfigError("agent", "required", _line_of(text, sec, key))
                continue
            try:
                raw[sec][key] = parser(val)
            except ValueError as e:
                raise ConfigError(f"{sec}.{key}", f"bad value {val!r} ({e})", _line_of(text, sec, key)) from e
    try:
        return build(raw)
    except ConfigError as e:
        if e.line is None:
            sec, _, key = e.key.partition(".")
            line = _line_of(text, sec, key) if key else None
            if line:
                raise ConfigError(e.key, str(e).split(": ", 1)[1], line) from None
        raise


def build(raw: dict) -> ExperimentConfig:
    """Fill defaults for a partially specified config and validate it."""
    ex = dict(raw.get("experiment", {}))
    agent = ex.get("agent")
    if not agent:
        raise ConfigError("agent", "required")
    if agent not in AGENTS:
        raise ConfigError("experiment.agent", f"must be one of {', '.join(AGENTS)}")
    fam = family(agent)

    env = dict(raw.get("env", {}))
    kind = env.get("kind", "grid")
    grid_keys = {"kind", "size", "width", "height", "reward_mode", "deceptive_reward", "goal_reward", "horizon"}
    pm_keys = {"kind", "half_width", "action_bound", "threshold", "target_radius", "target_seed", "horizon"}
    if kind == "grid":
        bad = set(env) - grid_keys
        size = env.pop("size", None)
        width = env.get("width", size if size is not None else 50)
        height = env.get("height", size if size is not None else width)
        env_out = {
            "kind": "grid",
            "width": width,
            "height": height,
            "reward_mode": env.get("reward_mode", "sparse"),
            "deceptive_reward": env.get("deceptive_reward", 0.001),
            "goal_reward": env.get("goal_reward", 1.0),
            "horizon": env.get("horizon", 4 * (width + height)),
        }
    elif kind == "pointmass":
        bad = set(env) - pm_keys
        env_out = {"kind": "pointmass"}
        for k in ("half_width", "action_bound", "threshold", "target_radius", "target_seed"):
            env_out[k] = env.get(k, SCHEMA["env"][k][1])
        env_out["horizon"] = env.get("horizon", 100)
    else:
        raise ConfigError("env.kind", "must be 'grid' or 'pointmass'")
    if bad:
        k = sorted(bad)[0]
        raise ConfigError(f"env.{k}", f"not valid for env kind {kind!r}")

    train_in = dict(raw.get("train", {}))
    common = ["hidden", "optimizer", "gamma"]
    per_family = {
        "dqn": common + ["lr", "batch_size", "buffer_capacity", "learning_starts", "train_freq", "target_sync", "eps_start", "eps_end", "eps_fraction"],
        "ddpg": common + ["actor_lr", "critic_lr", "tau", "batch_size", "buffer_capacity", "learning_starts", "noise", "ou_theta", "ou_sigma", "gauss_sigma"],
        "a2c": common + ["lr", "entropy_coef", "value_coef", "rollout_len", "workers", "snapshot_every"],
    }[fam]
    bad = set(train_in) - set(per_family)
    if bad:
        k = sorted(bad)[0]
        raise ConfigError(f"train.{k}", f"not used by agent {agent!r}")
    fam_defaults = {
        "dqn": {"lr": 1e-3, "batch_size": 32, "learning_starts": 1000},
        "ddpg": {"batch_size": 64, "learning_starts": 500},
        "a2c": {"lr": 7e-4},
    }[fam]
    train = {}
    for k in per_family:
        default = SCHEMA["train"][k][1]
        train[k] = train_in.get(k, fam_defaults.get(k, default))

    div_in = dict(raw.get("diversity", {}))
    diversity = {}
    if agent.startswith("div-"):
        keys = ["alpha_mode", "alpha0", "delta", "alpha_min", "alpha_max", "clip"] + (["perf_mode"] if fam == "a2c" else [])
        bad = set(div_in) - set(keys)
        if bad:
            k = sorted(bad)[0]
            raise ConfigError(f"diversity.{k}", f"not used by agent {agent!r}")
        for k in keys:
            diversity[k] = div_in.get(k, SCHEMA["diversity"][k][1])
        if diversity["alpha_mode"] is None:
            diversity["alpha_mode"] = "distance"
        if diversity["delta"] is None:
            diversity["delta"] = 0.02 if fam == "ddpg" else 0.05
    elif div_in:
        raise ConfigError("diversity", f"section not used by non-diversity agent {agent!r}")

    budget = ex.get("budget", _DEFAULT_BUDGET[env_out["kind"]])
    name = ex.get("name") or _default_name(agent, env_out)
    output = ex.get("output") or os.environ.get("DIV_EXPLORE_OUT", "runs")
    cfg = ExperimentConfig(
        name=name, agent=agent, budget=budget, seeds=list(ex.get("seeds", [0, 1, 2])), output=output,
        trace_every=ex.get("trace_every", 0), env=env_out, train=train, diversity=diversity,
    )
    return validate(cfg)


def _default_name(agent, env) -> str:
    if env["kind"] == "grid":
        return f"{agent}_{env['reward_mode']}_{env['width']}x{env['height']}"
    return f"{agent}_pointmass"


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def fail(key, msg):
        raise ConfigError(key, msg)

    if cfg.agent not in AGENTS:
        fail("experiment.agent", f"must be one of {', '.join(AGENTS)}")
    if cfg.budget < 0:
        fail("experiment.budget", "must be >= 0")
    if not cfg.seeds:
        fail("experiment.seeds", "at least one seed required")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        fail("experiment.seeds", "duplicate seeds")
    if not re.fullmatch(r"[A-Za-z0-9_.\-]+", cfg.name):
        fail("experiment.name", "only letters, digits, '_', '.', '-' allowed")
    e = cfg.env
    fam = family(cfg.agent)
    if e["kind"] == "grid":
        if fam == "ddpg":
            fail("env.kind", "ddpg agents need a continuous env (pointmass)")
        if e["width"] < 2 or e["height"] < 2:
            fail("env.width", "grid needs width and height >= 2")
        if e["reward_mode"] not in ("sparse", "deceptive"):
            fail("env.reward_mode", "must be 'sparse' or 'deceptive'")
        if e["horizon"] < e["width"] + e["height"]:
            fail("env.horizon", "must be >= width + height")
    else:
        if fam != "ddpg":
            fail("env.kind", f"agent {cfg.agent!r} needs a grid env")
        if not 0 < e["threshold"] < e["half_width"]:
            fail("env.threshold", "must lie in (0, half_width)")
        if e["action_bound"] <= 0:
            fail("env.action_bound", "must be positive")
        if not e["threshold"] < e["target_radius"] <= e["half_width"]:
            fail("env.target_radius", "must lie in (threshold, half_width]")
        if e["horizon"] <= 0:
            fail("env.horizon", "must be positive")
    t = cfg.train
    if not 0 < t["gamma"] <= 1:
        fail("train.gamma", "must lie in (0, 1]")
    if any(h <= 0 for h in t["hidden"]):
        fail("train.hidden", "layer sizes must be positive")
    if t["optimizer"] not in ("adam", "sgd"):
        fail("train.optimizer", "must be 'adam' or 'sgd'")
    for k in ("lr", "actor_lr", "critic_lr"):
        if k in t and t[k] < 0:
            fail(f"train.{k}", "must be >= 0")
    for k in ("batch_size", "buffer_capacity", "target_sync", "train_freq", "rollout_len", "workers", "snapshot_every"):
        if k in t and t[k] <= 0:
            fail(f"train.{k}", "must be positive")
    if "learning_starts" in t and t["learning_starts"] < 0:
        fail("train.learning_starts", "must be >= 0")
    if "eps_start" in t:
        if not 0 <= t["eps_end"] <= t["eps_start"] <= 1:
            fail("train.eps_end", "need 0 <= eps_end <= eps_start <= 1")
        if not 0 <= t["eps_fraction"] <= 1:
            fail("train.eps_fraction", "must lie in [0, 1]")
    if "tau" in t and not 0 <= t["tau"] <= 1:
        fail("train.tau", "must lie in [0, 1]")
    if "noise" in t and t["noise"] not in ("ou", "gaussian", "none"):
        fail("train.noise", "must be 'ou', 'gaussian' or 'none'")
    if "entropy_coef" in t and t["entropy_coef"] < 0:
        fail("train.entropy_coef", "must be >= 0")
    d = cfg.diversity
    if d:
        if d["alpha_mode"] not in ("fixed", "linear", "distance"):
            fail("diversity.alpha_mode", "must be 'fixed', 'linear' or 'distance'")
        if d["alpha0"] < 0:
            fail("diversity.alpha0", "must be >= 0")
        if d["delta"] <= 0:
            fail("diversity.delta", "must be positive")
        if not 0 <= d["alpha_min"] <= d["alpha_max"]:
            fail("diversity.alpha_max", "need 0 <= alpha_min <= alpha_max")
        if d["clip"] <= 0:
            fail("diversity.clip", "must be positive")
        if "perf_mode" in d and d["perf_mode"] not in ("proactive", "reactive"):
            fail("diversity.perf_mode", "must be 'proactive' or 'reactive'")
    return cfg
