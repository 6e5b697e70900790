import numpy as np
import pytest
from hypothesis import given, strategies as st

from divexplore.envs import GridWorld
from divexplore.metrics import (
    RewardLog, VisitationGrid, coverage, export_heatmap, heatmap_intensity, mean_last_n, read_pgm, record_visit,
)


def test_record_visit():
    g = VisitationGrid(5, 4)
    record_visit(g, (0, 0))
    assert g.counts[0][0] == 1 and g.total == 1
    for _ in range(6):
        g.record_visit((3, 4))
    assert g.counts[3, 4] == 6
    assert g.counts.dtype == np.int64
    with pytest.raises(IndexError):
        g.record_visit((4, 0))
    with pytest.raises(IndexError):
        g.record_visit((0, -1))


def test_visits_conserve_steps():
    rng = np.random.default_rng(0)
    env = GridWorld(width=12, height=9)
    g = VisitationGrid(12, 9)
    steps = 0
    for _ in range(5):
        env.reset()
        done = False
        while not done:
            g.record_visit(env.state)
            done = env.step(int(rng.integers(4))).done
            steps += 1
        assert g.total == steps


def test_mean_last_n():
    log = RewardLog()
    for _ in range(10):
        log.append(1.0, 5)
    assert mean_last_n(log) == 1.0
    assert mean_last_n([0.0] * 9 + [1.0]) == pytest.approx(0.1)
    assert mean_last_n([1.0, 0.0, 0.5], 10) == 0.5
    with pytest.raises(ValueError):
        mean_last_n([])


@given(st.lists(st.floats(-10, 10), min_size=10, max_size=40), st.lists(st.floats(-10, 10), max_size=10))
def test_mean_last_n_only_sees_tail(xs, prefix):
    assert mean_last_n(prefix + xs) == mean_last_n(xs)
    assert mean_last_n(xs) == pytest.approx(mean_last_n(list(reversed(xs[-10:]))))


def test_coverage():
    g = VisitationGrid(200, 200)
    assert coverage(g) == 0.0
    for i in range(100):
        g.record_visit((i, i))
    assert coverage(g) == 100 / 40000 == 0.0025
    g.counts[:] = 1
    assert coverage(g) == 1.0


def test_heatmap_intensity_rules():
    assert np.all(heatmap_intensity(np.full((3, 3), 7)) == 255)
    assert np.all(heatmap_intensity(np.zeros((2, 2), dtype=np.int64)) == 0)
    img = heatmap_intensity(np.array([[0, 1], [9, 99]]))
    assert img[0, 0] == 0 and img[1, 1] == 255
    assert img[0, 1] == round(255 * np.log(2) / np.log(100))
    assert img[1, 0] == round(255 * np.log(10) / np.log(100))


def test_heatmap_round_trip(tmp_path):
    g = VisitationGrid(7, 3)
    rng = np.random.default_rng(1)
    g.counts[:] = rng.integers(0, 1000, size=(3, 7))
    p = tmp_path / "h.pgm"
    export_heatmap(g, p)
    assert p.read_bytes().startswith(b"P5\n7 3\n255\n")
    assert np.array_equal(read_pgm(p), heatmap_intensity(g.counts))


def test_heatmap_io_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "h.pgm"
    with pytest.raises(OSError, match="missing"):
        export_heatmap(VisitationGrid(2, 2), bad)


def test_reward_log_csv(tmp_path):
    log = RewardLog()
    log.append(0.001, 12, 3.5)
    log.append(1.0, 40, 9.25)
    p = tmp_path / "rewards.csv"
    log.write_csv(p)
    text = p.read_bytes()
    assert b"\r" not in text
    assert text.splitlines()[0] == b"episode,total_reward,steps,wall_ms"
    back = RewardLog.read_csv(p)
    assert back.rewards == [0.001, 1.0]
    assert [r.episode for r in back.records] == [0, 1]
    log.write_csv(p, wall_time=False)
    assert text.splitlines()[1] != p.read_bytes().splitlines()[1]
    assert p.read_bytes().splitlines()[1] == b"0,0.001,12,0"
