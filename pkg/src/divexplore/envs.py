"""Benchmark environments: the deceptive/sparse gridworld and a sparse
point-mass reaching task.

Both are deterministic. The gridworld starts at the top-left cell and pays
the goal reward at the bottom-right cell; any rewarded step ends the episode.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

NORTH, SOUTH, WEST, EAST = 0, 1, 2, 3
ACTION_NAMES = ("north", "south", "west", "east")
_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


class GridState(NamedTuple):
    row: int
    col: int


class StepResult(NamedTuple):
    next_state: object
    reward: float
    done: bool
    info: Optional[dict] = None


@dataclass(frozen=True)
class Rect:
    """Inclusive-exclusive cell rectangle [row0, row1) x [col0, col1)."""

    row0: int
    row1: int
    col0: int
    col1: int

    def __contains__(self, cell) -> bool:
        r, c = cell
        return self.row0 <= r < self.row1 and self.col0 <= c < self.col1


def central_square(width: int, height: int) -> Rect:
    side = math.ceil(min(width, height) / 5)
    r0 = (height - side) // 2
    c0 = (width - side) // 2
    return Rect(r0, r0 + side, c0, c0 + side)


@dataclass
class GridWorldConfig:
    width: int = 50
    height: int = 50
    reward_mode: str = "sparse"
    deceptive_reward_value: float = 0.001
    goal_reward: float = 1.0
    horizon: Optional[int] = None
    deceptive_region: Optional[Rect] = None

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("gridworld needs width and height >= 2")
        if self.reward_mode not in ("sparse", "deceptive"):
            raise ValueError(f"reward_mode must be 'sparse' or 'deceptive', got {self.reward_mode!r}")
        if self.horizon is None:
            self.horizon = 4 * (self.width + self.height)
        if self.horizon < self.width + self.height:
            raise ValueError("horizon must be >= width + height")
        if self.deceptive_region is None:
            self.deceptive_region = central_square(self.width, self.height)
        if self.reward_mode == "deceptive" and ((0, 0) in self.deceptive_region or self.goal in self.deceptive_region):
            raise ValueError("deceptive region must not contain the start or goal cell")

    @property
    def goal(self) -> GridState:
        return GridState(self.height - 1, self.width - 1)


class GridWorld:
    n_actions = 4
    obs_dim = 2

    def __init__(self, cfg: GridWorldConfig = None, **kwargs):
        self.cfg = cfg if cfg is not None else GridWorldConfig(**kwargs)
        self.state = GridState(0, 0)
        self.t = 0
        c = self.cfg
        self._reward = np.zeros((c.height, c.width))
        if c.reward_mode == "deceptive":
            d = c.deceptive_region
            self._reward[d.row0 : d.row1, d.col0 : d.col1] = c.deceptive_reward_value
        self._reward[c.goal] = c.goal_reward

    @property
    def width(self):
        return self.cfg.width

    @property
    def height(self):
        return self.cfg.height

    @property
    def horizon(self):
        return self.cfg.horizon

    def reset(self) -> GridState:
        self.state = GridState(0, 0)
        self.t = 0
        return self.state

    def reward_at(self, cell) -> float:
        return float(self._reward[cell[0], cell[1]])

    def transition(self, state, action) -> StepResult:
        """Pure dynamics: no step counter, no horizon."""
        if not 0 <= action < 4:
            raise ValueError(f"invalid action {action}")
        dr, dc = _MOVES[action]
        r = min(max(state[0] + dr, 0), self.cfg.height - 1)
        c = min(max(state[1] + dc, 0), self.cfg.width - 1)
        nxt = GridState(r, c)
        reward = float(self._reward[r, c])
        return StepResult(nxt, reward, reward != 0.0)

    def step(self, action) -> StepResult:
        res = self.transition(self.state, int(action))
        self.t += 1
        self.state = res.next_state
        truncated = self.t >= self.cfg.horizon
        done = res.done or truncated
        return StepResult(res.next_state, res.reward, done, {"t": self.t, "terminal": res.done, "truncated": truncated and not res.done})

    def observe(self, state=None) -> np.ndarray:
        s = self.state if state is None else state
        return np.array([s[0] / (self.cfg.height - 1), s[1] / (self.cfg.width - 1)])


def grid_reset(env: GridWorld) -> GridState:
    return env.reset()


def grid_step(env: GridWorld, action) -> StepResult:
    return env.step(action)


def grid_observation(cfg: GridWorldConfig, state) -> np.ndarray:
    return np.array([state[0] / (cfg.height - 1), state[1] / (cfg.width - 1)])


def write_trace_csv(path, rows) -> None:
    """rows: iterables of (step, row, col, action, reward, done)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "row", "col", "action", "reward", "done"])
        for step, r, c, a, rew, done in rows:
            w.writerow([step, r, c, a, repr(float(rew)), int(bool(done))])


# -- continuous point mass ---------------------------------------------------


@dataclass
class PointMassConfig:
    half_width: float = 1.0
    action_bound: float = 0.05
    target: Optional[tuple] = None
    target_radius: float = 0.6
    threshold: float = 0.05
    horizon: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.threshold < self.half_width:
            raise ValueError("threshold must lie in (0, half_width)")
        if self.action_bound <= 0:
            raise ValueError("action_bound must be positive")
        if self.target is not None:
            t = np.asarray(self.target, dtype=np.float64)
            if t.shape != (2,) or np.any(np.abs(t) > self.half_width):
                raise ValueError("target must be a 2-vector inside the arena")
            if np.linalg.norm(t) <= self.threshold:
                raise ValueError("target must start farther than threshold from the origin")


class PointMass:
    """Agent starts at the origin; reward 1 and episode end once within
    ``threshold`` of the target, otherwise reward 0."""

    obs_dim = 2
    action_dim = 2

    def __init__(self, cfg: PointMassConfig = None, **kwargs):
        self.cfg = cfg if cfg is not None else PointMassConfig(**kwargs)
        c = self.cfg
        if c.target is not None:
            self.target = np.asarray(c.target, dtype=np.float64)
        else:
            ang = np.random.default_rng(c.seed).uniform(0.0, 2.0 * np.pi)
            self.target = c.target_radius * np.array([np.cos(ang), np.sin(ang)])
        self.position = np.zeros(2)
        self.t = 0

    @property
    def horizon(self):
        return self.cfg.horizon

    def reset(self) -> np.ndarray:
        self.position = np.zeros(2)
        self.t = 0
        return self.position.copy()

    def transition(self, position, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (2,) or not np.all(np.isfinite(a)):
            raise ValueError("action must be a finite 2-vector")
        b = self.cfg.action_bound
        hw = self.cfg.half_width
        nxt = np.clip(np.asarray(position, dtype=np.float64) + np.clip(a, -b, b), -hw, hw)
        hit = float(np.linalg.norm(nxt - self.target)) < self.cfg.threshold
        return StepResult(nxt, 1.0 if hit else 0.0, hit)

    def step(self, action) -> StepResult:
        res = self.transition(self.position, action)
        self.t += 1
        self.position = res.next_state
        truncated = self.t >= self.cfg.horizon
        return StepResult(res.next_state.copy(), res.reward, res.done or truncated, {"t": self.t, "terminal": res.done, "truncated": truncated and not res.done})

    def observe(self, position=None) -> np.ndarray:
        p = self.position if position is None else position
        return np.asarray(p, dtype=np.float64) / self.cfg.half_width


def pointmass_reset(env: PointMass) -> np.ndarray:
    return env.reset()


def pointmass_step(env: PointMass, action) -> StepResult:
    return env.step(action)
