"""Experiment orchestration: build agents from configs, run seeds, write
artifacts, and reproduce the gridworld comparison table.

Output layout::

    <out>/<experiment>/<seed>/rewards.csv
    <out>/<experiment>/<seed>/heatmap.pgm     (grid envs)
    <out>/<experiment>/<seed>/checkpoint
    <out>/<experiment>/<seed>/summary.csv
    <out>/<experiment>/summary.csv            (one line per seed)
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .a2c import A2cAgent
from .config import ExperimentConfig, family, parse_config
from .ddpg import DdpgAgent
from .dqn import DqnAgent
from .envs import GridWorld, GridWorldConfig, PointMass, PointMassConfig, write_trace_csv
from .metrics import RewardLog, VisitationGrid, export_heatmap, mean_last_n
from .nn import save_nets
from .replay import ReplayBuffer
from .scaling import AlphaScheduler

log = logging.getLogger(__name__)

SUMMARY_FIELDS = [
    "seed", "status", "episodes", "steps", "mean_last_10", "coverage",
    "steps_to_success", "final_alpha", "alpha_trace", "wall_s",
]
SUCCESS_RATE = 0.8
ALPHA_TRACE_POINTS = 10


def make_env(cfg: ExperimentConfig, seed: int = 0):
    e = cfg.env
    if e["kind"] == "grid":
        return GridWorld(GridWorldConfig(
            width=e["width"], height=e["height"], reward_mode=e["reward_mode"],
            deceptive_reward_value=e["deceptive_reward"], goal_reward=e["goal_reward"], horizon=e["horizon"],
        ))
    return PointMass(PointMassConfig(
        half_width=e["half_width"], action_bound=e["action_bound"], threshold=e["threshold"],
        target_radius=e["target_radius"], horizon=e["horizon"], seed=e["target_seed"],
    ))


def make_scheduler(cfg: ExperimentConfig) -> Optional[AlphaScheduler]:
    d = cfg.diversity
    if not d:
        return None
    return AlphaScheduler(
        mode=d["alpha_mode"], alpha0=d["alpha0"], delta=d["delta"], total_steps=max(cfg.budget, 1),
        alpha_min=d["alpha_min"], alpha_max=d["alpha_max"],
    )


def make_agent(cfg: ExperimentConfig, env, rng: np.random.Generator):
    t = cfg.train
    fam = family(cfg.agent)
    sched = make_scheduler(cfg)
    clip = cfg.diversity.get("clip", 10.0)
    if fam == "dqn":
        return DqnAgent(
            env.obs_dim, env.n_actions, rng, hidden=tuple(t["hidden"]), lr=t["lr"], optimizer=t["optimizer"],
            gamma=t["gamma"], eps_start=t["eps_start"], eps_end=t["eps_end"],
            eps_decay_steps=int(t["eps_fraction"] * cfg.budget), target_sync=t["target_sync"],
            batch_size=t["batch_size"], learning_starts=t["learning_starts"], train_freq=t["train_freq"],
            diversity=cfg.is_div, scheduler=sched, clip_c=clip,
        )
    if fam == "ddpg":
        return DdpgAgent(
            env.obs_dim, env.action_dim, rng, action_scale=cfg.env["action_bound"], hidden=tuple(t["hidden"]),
            actor_lr=t["actor_lr"], critic_lr=t["critic_lr"], gamma=t["gamma"], tau=t["tau"],
            batch_size=t["batch_size"], learning_starts=t["learning_starts"], noise=t["noise"],
            ou_theta=t["ou_theta"], ou_sigma=t["ou_sigma"], gauss_sigma=t["gauss_sigma"],
            diversity=cfg.is_div, scheduler=sched, clip_c=clip,
        )
    return A2cAgent(
        env.obs_dim, env.n_actions, rng, hidden=tuple(t["hidden"]), lr=t["lr"], gamma=t["gamma"],
        entropy_coef=t["entropy_coef"], value_coef=t["value_coef"], rollout_len=t["rollout_len"],
        diversity=cfg.diversity["perf_mode"] if cfg.is_div else "off", scheduler=sched, clip_c=clip,
        snapshot_every=t["snapshot_every"],
    )


@dataclass
class SeedResult:
    seed: int
    status: str
    log: RewardLog = field(default_factory=RewardLog)
    steps: int = 0
    coverage: float = float("nan")
    steps_to_success: Optional[int] = None
    alpha_trace: list = field(default_factory=list)
    wall_s: float = 0.0
    run_dir: Optional[Path] = None
    visits: Optional[VisitationGrid] = None
    error: str = ""

    @property
    def mean_last_10(self) -> float:
        return mean_last_n(self.log, 10) if len(self.log) else float("nan")


def steps_to_success(log: RewardLog, rate=SUCCESS_RATE, window=10) -> Optional[int]:
    """Cumulative env steps at the first episode where the trailing
    ``window``-episode success rate reaches ``rate``."""
    steps = 0
    flags = []
    for r in log.records:
        steps += r.steps
        flags.append(1.0 if r.total_reward > 0 else 0.0)
        if len(flags) >= window and sum(flags[-window:]) / window >= rate:
            return steps
    return None


def train_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    """Train one seed in memory. All randomness comes from one generator."""
    rng = np.random.default_rng(seed)
    env = make_env(cfg, seed)
    agent = make_agent(cfg, env, rng)
    fam = family(cfg.agent)
    grid = cfg.env["kind"] == "grid"
    visits = VisitationGrid(env.width, env.height) if grid else None
    rlog = RewardLog()
    alphas = []
    t0 = time.perf_counter()
    if fam in ("dqn", "ddpg"):
        replay = ReplayBuffer(
            cfg.train["buffer_capacity"], env.obs_dim,
            action_dim=None if fam == "dqn" else env.action_dim,
            n_actions=env.n_actions if fam == "dqn" and cfg.is_div else None,
        )
        while agent.total_steps < cfg.budget:
            if fam == "dqn":
                st = agent.train_episode(env, replay, rng, visits=visits)
            else:
                st = agent.train_episode(env, replay, rng)
            rlog.append(st.total_reward, st.steps, st.wall_ms)
            alphas.append(st.alpha)
    else:
        envs = [make_env(cfg, seed) for _ in range(cfg.train["workers"])]
        eval_env = make_env(cfg, seed)
        curve = agent.train(envs, cfg.budget, rng, eval_env=eval_env, visits=visits, log=rlog)
        alphas = [c["alpha"] for c in curve] if cfg.is_div else []
    res = SeedResult(seed, "ok", rlog, agent.total_steps)
    res.wall_s = time.perf_counter() - t0
    res.visits = visits
    res.coverage = visits.coverage() if visits is not None else float("nan")
    res.steps_to_success = steps_to_success(rlog)
    if alphas:
        idx = np.linspace(0, len(alphas) - 1, min(ALPHA_TRACE_POINTS, len(alphas))).round().astype(int)
        res.alpha_trace = [float(alphas[i]) for i in idx]
    res.agent = agent
    res.env = env
    return res


def _summary_row(r: SeedResult) -> dict:
    return {
        "seed": r.seed,
        "status": r.status,
        "episodes": len(r.log),
        "steps": r.steps,
        "mean_last_10": "" if r.status != "ok" or not len(r.log) else f"{r.mean_last_10:.6f}",
        "coverage": "" if r.coverage != r.coverage else f"{r.coverage:.6f}",
        "steps_to_success": "" if r.steps_to_success is None else r.steps_to_success,
        "final_alpha": f"{r.alpha_trace[-1]:.6g}" if r.alpha_trace else "",
        "alpha_trace": ";".join(f"{a:.6g}" for a in r.alpha_trace),
        "wall_s": f"{r.wall_s:.1f}",
    }


def _write_summary(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def greedy_trace(agent, env) -> list:
    """One greedy episode as (step, row, col, action, reward, done) rows."""
    env.reset()
    rows, done, t = [], False, 0
    while not done:
        obs = env.observe()
        if hasattr(agent, "q_values"):
            a = int(np.argmax(agent.q_values(obs)))
        else:
            a = int(np.argmax(agent.policy_net.forward(obs, cache=False)))
        r, c = env.state
        res = env.step(a)
        done = res.done
        rows.append((t, r, c, a, res.reward, done))
        t += 1
    return rows


def run_seed(cfg: ExperimentConfig, seed: int, exp_dir: Path) -> SeedResult:
    run_dir = exp_dir / str(seed)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        res = train_seed(cfg, seed)
        res.run_dir = run_dir
        res.log.write_csv(run_dir / "rewards.csv", wall_time=False)
        if res.visits is not None:
            export_heatmap(res.visits, run_dir / "heatmap.pgm")
            if cfg.trace_every:
                write_trace_csv(run_dir / "greedy_trace.csv", greedy_trace(res.agent, res.env))
        save_nets(run_dir / "checkpoint", res.agent.nets())
        _write_summary(run_dir / "summary.csv", [_summary_row(res)])
    except OSError as e:
        log.error("seed %s failed: %s", seed, e)
        res = SeedResult(seed, "failed", run_dir=run_dir, error=str(e))
    return res


def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None) -> list:
    exp_dir = Path(out or cfg.output) / cfg.name
    exp_dir.mkdir(parents=True, exist_ok=True)
    (exp_dir / "config.ini").write_text(cfg.to_text(), encoding="utf-8")
    results = []
    for seed in cfg.seeds:
        log.info("%s seed %d: training for %d steps", cfg.name, seed, cfg.budget)
        r = run_seed(cfg, seed, exp_dir)
        log.info("%s seed %d: %s mean_last_10=%s coverage=%s (%.0fs)", cfg.name, seed, r.status,
                 r.mean_last_10 if r.status == "ok" else "-", r.coverage, r.wall_s)
        results.append(r)
    _write_summary(exp_dir / "summary.csv", [_summary_row(r) for r in results])
    return results


# -- gridworld table ---------------------------------------------------------

REFERENCE_TABLE1 = {
    ("dqn", "deceptive"): {50: 0.010, 100: 0.010, 200: 0.010},
    ("div-dqn", "deceptive"): {50: 0.202, 100: 0.604, 200: 0.208},
    ("dqn", "sparse"): {50: 0.300, 100: 0.100, 200: 0.000},
    ("div-dqn", "sparse"): {50: 1.000, 100: 1.000, 200: 1.000},
}
TABLE1_SIZES = (50, 100, 200)
DECEPTIVE_RATIO = 10.0


def bundled_config(agent: str, mode: str, size: int) -> ExperimentConfig:
    name = f"table1_{agent.replace('-', '_')}_{mode}_{size}.ini"
    text = resources.files("divexplore").joinpath("configs", name).read_text(encoding="utf-8")
    return parse_config(text)


def table1_verdicts(means: dict) -> dict:
    """Pass/fail per size and reward mode.

    ``means[(agent, mode, size)]`` is the list of per-seed mean_last_10.
    """
    out = {}
    for size in sorted({k[2] for k in means}):
        key_d, key_v = ("div-dqn", "sparse", size), ("dqn", "sparse", size)
        if key_d in means and key_v in means:
            div, van = means[key_d], means[key_v]
            need = (len(div) * 2 + 2) // 3
            div_ok = sum(m == 1.0 for m in div) >= need
            if size >= 200:
                van_ok = all(m == 0.0 for m in van)
                rule = f"div==1 on >={need}/{len(div)} seeds, dqn==0 on all"
            else:
                van_ok = float(np.mean(van)) <= 0.5
                rule = f"div==1 on >={need}/{len(div)} seeds, dqn mean<=0.5"
            out[("sparse", size)] = (div_ok and van_ok, rule)
        key_d, key_v = ("div-dqn", "deceptive", size), ("dqn", "deceptive", size)
        if key_d in means and key_v in means:
            div, van = float(np.mean(means[key_d])), float(np.mean(means[key_v]))
            out[("deceptive", size)] = (div >= DECEPTIVE_RATIO * van, f"div >= {DECEPTIVE_RATIO:g} x dqn")
    return out


def reproduce_table1(sizes=TABLE1_SIZES, modes=("deceptive", "sparse"), seeds=None, out="runs", budget_scale=1.0):
    """Run DQN and Div-DQN on every (mode, size) cell; return
    ``(rows, verdicts, results)`` and write ``<out>/table1.csv``."""
    means, results = {}, {}
    for mode in modes:
        for size in sizes:
            for agent in ("dqn", "div-dqn"):
                cfg = bundled_config(agent, mode, size)
                changes = {}
                if seeds is not None:
                    changes["seeds"] = list(seeds)
                if budget_scale != 1.0:
                    changes["budget"] = int(cfg.budget * budget_scale)
                if changes:
                    cfg = cfg.replace(**changes)
                rs = run_experiment(cfg, out)
                results[(agent, mode, size)] = rs
                means[(agent, mode, size)] = [r.mean_last_10 for r in rs if r.status == "ok"]
    verdicts = table1_verdicts(means)
    rows = []
    for (agent, mode, size), ms in sorted(means.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2])):
        ok, rule = verdicts.get((mode, size), (None, ""))
        cov = [r.coverage for r in results[(agent, mode, size)] if r.status == "ok"]
        rows.append({
            "reward_mode": mode, "agent": agent, "size": size,
            "mean_last_10": f"{np.mean(ms):.3f}" if ms else "",
            "per_seed": ";".join(f"{m:.3f}" for m in ms),
            "coverage": f"{np.mean(cov):.4f}" if cov else "",
            "reported": f"{REFERENCE_TABLE1[(agent, mode)][size]:.3f}" if size in REFERENCE_TABLE1[(agent, mode)] else "",
            "verdict": "" if ok is None else ("pass" if ok else "FAIL"),
            "rule": rule,
        })
    Path(out).mkdir(parents=True, exist_ok=True)
    with open(Path(out) / "table1.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]) if rows else ["reward_mode"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows, verdicts, results


def format_table(rows) -> str:
    head = f"{'mode':<10} {'agent':<8} {'size':>5} {'ours':>7} {'reported':>8} {'coverage':>9}  verdict"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['reward_mode']:<10} {r['agent']:<8} {r['size']:>5} {r['mean_last_10']:>7} {r['reported']:>8} {r['coverage']:>9}  {r['verdict']} {r['rule'] if r['agent'] == 'div-dqn' else ''}")
    return "\n".join(lines)
