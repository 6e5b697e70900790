import pytest
from hypothesis import given, strategies as st

from divexplore.config import AGENTS, ConfigError, parse_config

GRID = """\
[experiment]
agent = div-dqn
seeds = 0, 1, 2

[env]
size = 200
reward_mode = sparse
"""


def test_empty_agent_required():
    with pytest.raises(ConfigError, match="agent: required") as e:
        parse_config("[experiment]\nagent =\n")
    assert e.value.line == 2


def test_missing_agent_required():
    with pytest.raises(ConfigError, match="agent: required"):
        parse_config("[env]\nsize = 10\n")


def test_defaults_filled():
    cfg = parse_config(GRID)
    assert cfg.agent == "div-dqn" and cfg.seeds == [0, 1, 2]
    assert cfg.env == {"kind": "grid", "width": 200, "height": 200, "reward_mode": "sparse",
                       "deceptive_reward": 0.001, "goal_reward": 1.0, "horizon": 1600}
    t = cfg.train
    assert (t["lr"], t["gamma"], t["batch_size"], t["target_sync"], t["eps_start"], t["eps_end"], t["eps_fraction"]) == (
        1e-3, 0.99, 32, 500, 1.0, 0.05, 0.1)
    assert t["optimizer"] == "adam" and t["hidden"] == [64, 64] and t["buffer_capacity"] == 100_000
    assert cfg.diversity["alpha0"] == 0.1 and cfg.diversity["delta"] == 0.05 and cfg.diversity["clip"] == 10.0
    assert cfg.diversity["alpha_mode"] == "distance"
    assert cfg.name == "div-dqn_sparse_200x200"


def test_family_defaults():
    d = parse_config("[experiment]\nagent = div-ddpg\n[env]\nkind = pointmass\n")
    assert d.diversity["delta"] == 0.02 and d.train["batch_size"] == 64 and d.budget == 30_000
    a = parse_config("[experiment]\nagent = a2c\n")
    assert a.train["lr"] == 7e-4 and a.train["workers"] == 4 and a.train["rollout_len"] == 5
    assert a.train["snapshot_every"] == 20 and not a.diversity


def test_round_trip():
    for text in (GRID, "[experiment]\nagent = div-a2c\n[diversity]\nperf_mode = proactive\n",
                 "[experiment]\nagent = ddpg\nbudget = 123\n[env]\nkind = pointmass\ntarget_seed = 4\n"):
        cfg = parse_config(text)
        assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("text,key,line", [
    ("[experiment]\nagent = dqn\ncolour = red\n", "experiment.colour", 3),
    ("[experiment]\nagent = dqn\n[envv]\nsize = 3\n", "envv", 3),
    ("[experiment]\nagent = dqn\n[train]\nlr = fast\n", "train.lr", 4),
    ("[experiment]\nagent = dqn\n[train]\ngamma = 1.5\n", "train.gamma", 4),
    ("[experiment]\nagent = dqn\n[train]\ntau = 0.1\n", "train.tau", 4),
    ("[experiment]\nagent = dqn\n[diversity]\nalpha0 = 0.1\n", "diversity", None),
    ("[experiment]\nagent = div-dqn\n[diversity]\nalpha_mode = cosine\n", "diversity.alpha_mode", 4),
    ("[experiment]\nagent = ddpg\n", "env.kind", None),
    ("[experiment]\nagent = dqn\nseeds = 1, 1\n", "experiment.seeds", 3),
    ("[experiment]\nagent = dqn\n[env]\nsize = 10\nhorizon = 3\n", "env.horizon", 5),
    ("[experiment]\nagent = sarsa\n", "experiment.agent", 2),
])
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.key == key
    assert e.value.line == line
    assert str(e.value).startswith(key)


def test_malformed_text():
    with pytest.raises(ConfigError):
        parse_config("[experiment\nagent = dqn\n")
    with pytest.raises(ConfigError):
        parse_config("agent = dqn\n[experiment]\n")


def test_path_source(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(GRID)
    assert parse_config(p) == parse_config(str(p)) == parse_config(GRID)
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "none.ini")


def test_output_env_var(monkeypatch):
    monkeypatch.setenv("DIV_EXPLORE_OUT", "/tmp/somewhere")
    assert parse_config("[experiment]\nagent = dqn\n").output == "/tmp/somewhere"


def test_replace_validates():
    cfg = parse_config(GRID)
    assert cfg.replace(seeds=[7]).seeds == [7]
    with pytest.raises(ConfigError):
        cfg.replace(seeds=[])


@given(st.text(max_size=200))
def test_parse_is_total(text):
    try:
        parse_config("[experiment]\n" + text)
    except ConfigError:
        pass


@given(st.sampled_from(AGENTS), st.integers(0, 10**6), st.lists(st.integers(0, 10**4), min_size=1, max_size=4, unique=True))
def test_round_trip_property(agent, budget, seeds):
    env = "[env]\nkind = pointmass\n" if "ddpg" in agent else "[env]\nsize = 20\nreward_mode = deceptive\n"
    text = f"[experiment]\nagent = {agent}\nbudget = {budget}\nseeds = {', '.join(map(str, seeds))}\n{env}"
    cfg = parse_config(text)
    assert parse_config(cfg.to_text()) == cfg
