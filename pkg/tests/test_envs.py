import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from divexplore.envs import (
    EAST, NORTH, SOUTH, WEST, GridState, GridWorld, GridWorldConfig, PointMass, PointMassConfig, Rect,
    central_square, grid_observation, grid_reset, grid_step, pointmass_reset, pointmass_step, write_trace_csv,
)


def test_reset_top_left():
    env = GridWorld(width=50, height=50)
    assert grid_reset(env) == (0, 0)
    assert grid_reset(env) == grid_reset(env)


def test_reset_mid_episode():
    env = GridWorld(width=10, height=10)
    for _ in range(5):
        grid_step(env, SOUTH)
    assert env.t == 5
    assert grid_reset(env) == (0, 0)
    assert env.t == 0


def test_wall_clamp():
    env = GridWorld(width=10, height=10)
    env.reset()
    res = grid_step(env, NORTH)
    assert res.next_state == (0, 0) and res.reward == 0.0 and not res.done
    assert grid_step(env, WEST).next_state == (0, 0)


def test_goal_is_terminal():
    env = GridWorld(width=10, height=10, reward_mode="deceptive")
    res = env.transition(GridState(9, 8), EAST)
    assert res.next_state == (9, 9) and res.reward == 1.0 and res.done


def test_deceptive_cell():
    cfg = GridWorldConfig(width=50, height=50, reward_mode="deceptive")
    env = GridWorld(cfg)
    d = cfg.deceptive_region
    res = env.transition(GridState(d.row0 - 1, d.col0), SOUTH)
    assert res.reward == 0.001 and res.done
    sparse = GridWorld(width=50, height=50)
    assert sparse.transition(GridState(d.row0 - 1, d.col0), SOUTH).reward == 0.0


@pytest.mark.parametrize("size,side", [(50, 10), (100, 20), (200, 40), (7, 2)])
def test_central_square(size, side):
    r = central_square(size, size)
    assert r.row1 - r.row0 == side and r.col1 - r.col0 == side
    # centered: equal margins up to one cell
    assert abs(r.row0 - (size - r.row1)) <= 1


def test_central_square_200_cells():
    r = central_square(200, 200)
    assert (r.row0, r.row1) == (80, 120)


def test_horizon_default():
    assert GridWorldConfig(width=50, height=50).horizon == 400


def test_config_validation():
    with pytest.raises(ValueError):
        GridWorldConfig(reward_mode="dense")
    with pytest.raises(ValueError):
        GridWorldConfig(width=10, height=10, horizon=5)
    with pytest.raises(ValueError):
        GridWorldConfig(width=10, height=10, reward_mode="deceptive", deceptive_region=Rect(0, 2, 0, 2))


def test_observation_values():
    cfg = GridWorldConfig(width=200, height=200)
    assert np.array_equal(grid_observation(cfg, (0, 0)), [0.0, 0.0])
    assert np.array_equal(grid_observation(cfg, (199, 199)), [1.0, 1.0])
    assert np.allclose(grid_observation(cfg, (99, 99)), [0.4975, 0.4975], atol=1e-4)
    assert np.allclose(grid_observation(cfg, (99, 99)), [99 / 199] * 2, atol=1e-15)


def test_horizon_truncates():
    env = GridWorld(width=5, height=5, horizon=12)
    env.reset()
    steps = 0
    while True:
        res = env.step(NORTH)
        steps += 1
        if res.done:
            break
    assert steps == 12
    assert res.info["truncated"] and not res.info["terminal"]


@given(st.lists(st.integers(0, 3), min_size=1, max_size=400), st.sampled_from(["sparse", "deceptive"]))
def test_random_walks(actions, mode):
    env = GridWorld(width=20, height=15, reward_mode=mode)
    env.reset()
    total, n = 0.0, 0
    for a in actions:
        res = env.step(a)
        n += 1
        assert 0 <= res.next_state.row < 15 and 0 <= res.next_state.col < 20
        if res.reward != 0:
            assert res.done
        total += res.reward
        if res.done:
            break
    assert n <= env.horizon
    assert total in ({0.0, 1.0} if mode == "sparse" else {0.0, 0.001, 1.0})


def test_long_random_walk_bounds():
    rng = np.random.default_rng(0)
    env = GridWorld(width=50, height=50)
    for _ in range(20):
        env.reset()
        for a in rng.integers(0, 4, 500):
            res = env.step(int(a))
            assert 0 <= res.next_state.row < 50 and 0 <= res.next_state.col < 50
            if res.done:
                break


@given(st.integers(0, 9), st.integers(0, 9), st.integers(0, 3))
def test_dynamics_deterministic(r, c, a):
    env = GridWorld(width=10, height=10, reward_mode="deceptive")
    assert env.transition(GridState(r, c), a) == env.transition(GridState(r, c), a)


def test_invalid_action():
    with pytest.raises(ValueError):
        GridWorld(width=5, height=5).step(4)


def test_trace_csv(tmp_path):
    p = tmp_path / "trace.csv"
    write_trace_csv(p, [(0, 0, 0, 1, 0.0, False), (1, 1, 0, 3, 0.001, True)])
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["step", "row", "col", "action", "reward", "done"]
    assert rows[2] == ["1", "1", "0", "3", "0.001", "1"]


# -- point mass --------------------------------------------------------------


def test_pointmass_reset():
    env = PointMass()
    assert np.array_equal(pointmass_reset(env), [0.0, 0.0])


def test_pointmass_target_seeded():
    a, b = PointMass(PointMassConfig(seed=3)), PointMass(PointMassConfig(seed=3))
    assert np.array_equal(a.target, b.target)
    assert not np.array_equal(a.target, PointMass(PointMassConfig(seed=4)).target)
    for s in range(20):
        assert np.linalg.norm(PointMass(PointMassConfig(seed=s)).target) > 0.05


def test_pointmass_zero_action():
    env = PointMass()
    env.reset()
    res = pointmass_step(env, [0.0, 0.0])
    assert np.array_equal(res.next_state, [0.0, 0.0]) and res.reward == 0.0 and not res.done


def test_pointmass_action_clamp():
    env = PointMass()
    env.reset()
    res = pointmass_step(env, [10.0, 10.0])
    assert np.allclose(res.next_state, [0.05, 0.05], atol=1e-15)


def test_pointmass_reaches_target():
    env = PointMass(PointMassConfig(target=(0.1, 0.0)))
    env.reset()
    env.step([0.05, 0.0])
    res = env.step([0.02, 0.0])
    assert res.reward == 1.0 and res.done and res.info["terminal"]


def test_pointmass_arena_clamp_and_horizon():
    env = PointMass(PointMassConfig(target=(-0.5, -0.5), horizon=50))
    env.reset()
    for k in range(50):
        res = env.step([1.0, 1.0])
        assert np.all(np.abs(res.next_state) <= 1.0)
    assert res.done and res.info["truncated"]


def test_pointmass_validation():
    with pytest.raises(ValueError):
        PointMassConfig(threshold=2.0)
    with pytest.raises(ValueError):
        PointMassConfig(target=(0.01, 0.0))
    with pytest.raises(ValueError):
        PointMass().step([np.nan, 0.0])
