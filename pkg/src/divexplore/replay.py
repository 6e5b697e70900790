"""Ring-buffer experience replay.

Records are kept column-wise in preallocated arrays so minibatch sampling
is a fancy-index per column. ``prior_q`` holds the acting network's full
Q-vector at storage time, which the diversity loss of Div-DQN compares
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


@dataclass
class Transition:
    state_obs: np.ndarray
    action: Union[int, np.ndarray]
    reward: float
    next_state_obs: np.ndarray
    done: bool
    prior_q: Optional[np.ndarray] = None


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    prior_q: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.rewards)


def stack(transitions) -> Batch:
    ts = list(transitions)
    pq = None
    if ts and all(t.prior_q is not None for t in ts):
        pq = np.stack([np.asarray(t.prior_q, dtype=np.float64) for t in ts])
    acts = [t.action for t in ts]
    actions = np.asarray(acts, dtype=np.int64) if np.isscalar(acts[0]) else np.stack([np.asarray(a, dtype=np.float64) for a in acts])
    return Batch(
        obs=np.stack([np.asarray(t.state_obs, dtype=np.float64) for t in ts]),
        actions=actions,
        rewards=np.array([t.reward for t in ts], dtype=np.float64),
        next_obs=np.stack([np.asarray(t.next_state_obs, dtype=np.float64) for t in ts]),
        dones=np.array([t.done for t in ts], dtype=bool),
        prior_q=pq,
    )


class ReplayBuffer:
    """Fixed-capacity FIFO buffer.

    ``action_dim=None`` stores integer (discrete) actions; an int stores
    continuous action vectors. ``n_actions`` switches on ``prior_q``
    storage (required on every push when set).
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: Optional[int] = None, n_actions: Optional[int] = None):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.n_actions = n_actions
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        if action_dim is None:
            self.actions = np.zeros(capacity, dtype=np.int64)
        else:
            self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.prior_q = np.zeros((capacity, n_actions)) if n_actions else None
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        s = np.asarray(t.state_obs, dtype=np.float64)
        s2 = np.asarray(t.next_state_obs, dtype=np.float64)
        if s.shape != (self.obs_dim,) or s2.shape != (self.obs_dim,):
            raise ValueError(f"observation shape must be ({self.obs_dim},)")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(s2)) and np.isfinite(t.reward)):
            raise ValueError("transition contains non-finite values")
        if self.action_dim is None:
            a = int(t.action)
        else:
            a = np.asarray(t.action, dtype=np.float64)
            if a.shape != (self.action_dim,) or not np.all(np.isfinite(a)):
                raise ValueError(f"continuous action must be a finite ({self.action_dim},) vector")
        if self.prior_q is not None:
            if t.prior_q is None:
                raise ValueError("this buffer stores prior_q; transition has none")
            q = np.asarray(t.prior_q, dtype=np.float64)
            if q.shape != (self.n_actions,):
                raise ValueError(f"prior_q must have length {self.n_actions}, got {q.shape}")
            if not np.all(np.isfinite(q)):
                raise ValueError("prior_q contains non-finite values")
        i = self.cursor
        self.obs[i] = s
        self.next_obs[i] = s2
        self.actions[i] = a
        self.rewards[i] = t.reward
        self.dones[i] = bool(t.done)
        if self.prior_q is not None:
            self.prior_q[i] = q
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add(self, obs, action, reward, next_obs, done, prior_q=None) -> None:
        """Unchecked fast path used by the training loops."""
        i = self.cursor
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.dones[i] = done
        if self.prior_q is not None:
            self.prior_q[i] = prior_q
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _indices(self, batch_size, rng):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch_size)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draws with replacement, returned as stacked arrays."""
        idx = self._indices(batch_size, rng)
        return Batch(
            obs=self.obs[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_obs=self.next_obs[idx],
            dones=self.dones[idx],
            prior_q=None if self.prior_q is None else self.prior_q[idx],
        )

    def sample_uniform(self, batch_size: int, rng: np.random.Generator) -> list:
        idx = self._indices(batch_size, rng)
        return [self._slot(int(j)) for j in idx]

    def get(self, i: int) -> Transition:
        """Record ``i`` in storage order (0 = oldest surviving)."""
        if not 0 <= i < self.size:
            raise IndexError(i)
        j = (self.cursor + i) % self.capacity if self.size == self.capacity else i
        return self._slot(j)

    def _slot(self, j: int) -> Transition:
        act = int(self.actions[j]) if self.action_dim is None else self.actions[j].copy()
        return Transition(
            self.obs[j].copy(), act, float(self.rewards[j]), self.next_obs[j].copy(), bool(self.dones[j]),
            None if self.prior_q is None else self.prior_q[j].copy(),
        )

    def contents(self) -> list:
        return [self.get(i) for i in range(self.size)]
