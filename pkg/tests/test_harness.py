import csv

import numpy as np
import pytest

from divexplore.cli import main
from divexplore.config import parse_config
from divexplore.harness import (
    REFERENCE_TABLE1, bundled_config, format_table, reproduce_table1, run_experiment, steps_to_success, table1_verdicts,
)
from divexplore.metrics import RewardLog, read_pgm
from divexplore.nn import load_nets

SMALL = """\
[experiment]
name = small
agent = {agent}
budget = {budget}
seeds = {seeds}

[env]
{env}

[train]
hidden = 8
{train}
"""
GRID_ENV = "size = 8\nreward_mode = deceptive"
PM_ENV = "kind = pointmass\nhorizon = 30"


def small(agent="div-dqn", budget=600, seeds="0", env=GRID_ENV, train=None):
    if train is None:
        train = {"dqn": "learning_starts = 50", "ddpg": "learning_starts = 50\nbatch_size = 8", "a2c": "workers = 2\nsnapshot_every = 3"}[
            agent.replace("div-", "")]
    return parse_config(SMALL.format(agent=agent, budget=budget, seeds=seeds, env=env, train=train))


def read_summary(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_budget_zero(tmp_path):
    cfg = small(budget=0)
    (r,) = run_experiment(cfg, tmp_path)
    assert r.status == "ok" and len(r.log) == 0
    d = tmp_path / "small" / "0"
    assert (d / "rewards.csv").read_text() == "episode,total_reward,steps,wall_ms\n"
    nets = load_nets(d / "checkpoint")
    assert set(nets) == {"online", "target"}
    assert np.array_equal(read_pgm(d / "heatmap.pgm"), np.zeros((8, 8), np.uint8))


@pytest.mark.parametrize("agent,env", [("dqn", GRID_ENV), ("div-dqn", GRID_ENV), ("ddpg", PM_ENV), ("div-ddpg", PM_ENV),
                                       ("a2c", GRID_ENV), ("div-a2c", GRID_ENV)])
def test_same_seed_byte_identical(tmp_path, agent, env):
    cfg = small(agent=agent, env=env)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("rewards.csv", "heatmap.pgm", "checkpoint", "summary.csv"):
        pa, pb = tmp_path / "a" / "small" / "0" / name, tmp_path / "b" / "small" / "0" / name
        if name == "heatmap.pgm" and "ddpg" in agent:
            assert not pa.exists()
            continue
        if name == "summary.csv":
            ra, rb = read_summary(pa), read_summary(pb)
            for row in ra + rb:
                row.pop("wall_s")
            assert ra == rb
            continue
        assert pa.read_bytes() == pb.read_bytes(), name


def test_three_seeds_layout(tmp_path):
    cfg = small(seeds="0, 1, 2")
    rs = run_experiment(cfg, tmp_path)
    exp = tmp_path / "small"
    assert sorted(p.name for p in exp.iterdir()) == ["0", "1", "2", "config.ini", "summary.csv"]
    rows = read_summary(exp / "summary.csv")
    assert [r["seed"] for r in rows] == ["0", "1", "2"] and all(r["status"] == "ok" for r in rows)
    assert parse_config(exp / "config.ini") == cfg
    for r, row in zip(rs, rows):
        assert float(row["mean_last_10"]) == pytest.approx(r.mean_last_10, abs=1e-6)
        assert RewardLog.read_csv(exp / str(r.seed) / "rewards.csv").rewards == r.log.rewards
        assert row["alpha_trace"]


def test_io_failure_marks_only_that_seed(tmp_path):
    exp = tmp_path / "small"
    exp.mkdir()
    (exp / "1").write_text("not a directory")
    rs = run_experiment(small(seeds="0, 1"), tmp_path)
    assert [r.status for r in rs] == ["ok", "failed"]
    assert [r["status"] for r in read_summary(exp / "summary.csv")] == ["ok", "failed"]


def test_visit_total_matches_steps(tmp_path):
    (r,) = run_experiment(small(), tmp_path)
    assert r.visits.total == r.steps == sum(rec.steps for rec in r.log.records)


def test_steps_to_success():
    log = RewardLog()
    for k in range(20):
        log.append(1.0 if k >= 5 else 0.0, 10)
    # first window with >= 8 of 10 successes ends at episode index 12
    assert steps_to_success(log) == 130
    empty = RewardLog()
    empty.append(0.0, 5)
    assert steps_to_success(empty) is None


def test_bundled_configs():
    budgets = {50: 200_000, 100: 800_000, 200: 3_000_000}
    for agent in ("dqn", "div-dqn"):
        for mode in ("deceptive", "sparse"):
            for size in (50, 100, 200):
                cfg = bundled_config(agent, mode, size)
                assert cfg.agent == agent and cfg.env["width"] == size and cfg.env["reward_mode"] == mode
                assert cfg.budget == budgets[size] and cfg.seeds == [0, 1, 2]


def test_reference_table_values():
    assert REFERENCE_TABLE1[("dqn", "sparse")] == {50: 0.3, 100: 0.1, 200: 0.0}
    assert REFERENCE_TABLE1[("div-dqn", "sparse")] == {50: 1.0, 100: 1.0, 200: 1.0}
    assert REFERENCE_TABLE1[("div-dqn", "deceptive")] == {50: 0.202, 100: 0.604, 200: 0.208}
    assert set(REFERENCE_TABLE1[("dqn", "deceptive")].values()) == {0.010}


def test_table1_verdicts():
    means = {
        ("div-dqn", "sparse", 50): [1.0, 1.0, 0.0], ("dqn", "sparse", 50): [1.0, 0.0, 0.0],
        ("div-dqn", "sparse", 200): [1.0, 1.0, 1.0], ("dqn", "sparse", 200): [0.0, 0.0, 0.1],
        ("div-dqn", "deceptive", 100): [0.2, 0.0, 0.0], ("dqn", "deceptive", 100): [0.001, 0.001, 0.001],
    }
    v = table1_verdicts(means)
    assert v[("sparse", 50)][0] is True
    assert v[("sparse", 200)][0] is False
    assert v[("deceptive", 100)][0] is True


def test_reproduce_table1_smoke(tmp_path):
    rows, verdicts, _ = reproduce_table1(sizes=[50], modes=["sparse"], seeds=[0], out=tmp_path, budget_scale=0.005)
    assert {r["agent"] for r in rows} == {"dqn", "div-dqn"}
    assert (tmp_path / "table1.csv").exists()
    assert ("sparse", 50) in verdicts
    assert "reported" in format_table(rows)


# -- CLI ---------------------------------------------------------------------


def test_cli_no_args(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_cli_unknown_subcommand():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_cli_unknown_flag():
    with pytest.raises(SystemExit) as e:
        main(["run", "x.ini", "--colour", "red"])
    assert e.value.code == 2


def test_cli_run_seed_override(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text(small(seeds="0, 1, 2").to_text())
    assert main(["run", str(p), "--seed", "7", "--out", str(tmp_path / "out"), "--budget", "300"]) == 0
    exp = tmp_path / "out" / "small"
    assert sorted(d.name for d in exp.iterdir() if d.is_dir()) == ["7"]
    assert parse_config(exp / "config.ini").budget == 300
    assert "seed=7" in capsys.readouterr().out
    assert main(["heatmap", str(exp / "7")]) == 0
    assert "8x8" in capsys.readouterr().out


def test_cli_config_error(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[experiment]\nagent = dqn\nbogus = 1\n")
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert "experiment.bogus" in err and "line 3" in err


def test_cli_heatmap_missing(tmp_path):
    assert main(["heatmap", str(tmp_path)]) == 1


def test_cli_gradcheck(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    assert out.count("ok") >= 8 and "FAIL" not in out


def test_cli_out_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("DIV_EXPLORE_OUT", str(tmp_path / "env_out"))
    p = tmp_path / "c.ini"
    p.write_text(SMALL.format(agent="dqn", budget=100, seeds="3", env=GRID_ENV, train="learning_starts = 10"))
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "env_out" / "small" / "3" / "rewards.csv").exists()
