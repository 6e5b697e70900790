"""DQN and its diversity-regularised variant.

The diversity variant subtracts ``alpha * mean(clip(KL(softmax(Q(s)) ||
softmax(Q'(s)))))`` from the TD loss, where ``Q'`` is the Q-vector the
acting network produced when the transition was stored.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import Mlp, Optimizer, softmax_kl
from .replay import Batch, ReplayBuffer
from .scaling import AlphaScheduler


@dataclass
class EpisodeStats:
    total_reward: float
    steps: int
    mean_loss: float
    alpha: float
    wall_ms: float = 0.0
    mean_distance: float = 0.0


class DqnAgent:
    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        hidden=(64, 64),
        lr=1e-3,
        optimizer="adam",
        gamma=0.99,
        eps_start=1.0,
        eps_end=0.05,
        eps_decay_steps=10_000,
        target_sync=500,
        batch_size=32,
        learning_starts=1000,
        train_freq=1,
        diversity=False,
        scheduler: Optional[AlphaScheduler] = None,
        clip_c=10.0,
    ):
        if not 0 < gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if target_sync <= 0:
            raise ValueError("target_sync must be positive")
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.online = Mlp.init([obs_dim, *hidden, n_actions], rng)
        self.target = self.online.copy()
        self.opt = Optimizer(self.online.flat, kind=optimizer, lr=lr)
        self.gamma = gamma
        self.eps_start, self.eps_end, self.eps_decay_steps = eps_start, eps_end, eps_decay_steps
        self.target_sync = target_sync
        self.batch_size = batch_size
        self.learning_starts = learning_starts
        self.train_freq = train_freq
        self.diversity = diversity
        self.scheduler = scheduler if scheduler is not None else AlphaScheduler(mode="fixed", alpha0=0.0)
        self.clip_c = clip_c
        self.total_steps = 0
        self.updates = 0
        self._since_sync = 0

    # -- acting --------------------------------------------------------------

    def epsilon(self, t: Optional[int] = None) -> float:
        t = self.total_steps if t is None else t
        if self.eps_decay_steps <= 0:
            return self.eps_end
        if t >= self.eps_decay_steps:
            return self.eps_end
        frac = t / self.eps_decay_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def q_values(self, obs) -> np.ndarray:
        return self.online.forward(obs, cache=False)

    def act(self, obs, rng: np.random.Generator, epsilon: Optional[float] = None):
        """Epsilon-greedy action and the Q-vector it was chosen from."""
        eps = self.epsilon() if epsilon is None else epsilon
        q = self.q_values(obs)
        if rng.random() < eps:
            return int(rng.integers(self.n_actions)), q
        return int(np.argmax(q)), q

    # -- losses --------------------------------------------------------------

    def td_targets(self, batch: Batch) -> np.ndarray:
        q_next = self.target.forward(batch.next_obs, cache=False)
        return batch.rewards + self.gamma * np.where(batch.dones, 0.0, q_next.max(axis=1))

    def _td_part(self, batch: Batch):
        q = self.online.forward(batch.obs)
        y = self.td_targets(batch)
        rows = np.arange(len(batch))
        td = q[rows, batch.actions] - y
        dq = np.zeros_like(q)
        dq[rows, batch.actions] = 2.0 * td / len(batch)
        return q, float(np.mean(td * td)), dq

    def dqn_loss(self, batch: Batch):
        """Mean squared TD error and its gradient w.r.t. the online net."""
        _, loss, dq = self._td_part(batch)
        return loss, self.online.backward(dq)

    def div_dqn_loss(self, batch: Batch, alpha: Optional[float] = None):
        """TD loss minus the clipped KL diversity term.

        Returns ``(loss, grads, mean_clipped_kl)``.
        """
        if batch.prior_q is None:
            raise ValueError("diversity loss needs prior_q on every transition")
        alpha = self.scheduler.alpha if alpha is None else alpha
        q, loss, dq = self._td_part(batch)
        kl, _, dkl = softmax_kl(q, batch.prior_q)
        c = self.clip_c
        clipped = np.clip(kl, -c, c)
        div = float(np.mean(clipped))
        inside = (np.abs(kl) < c)[:, None]
        dq = dq - (alpha / len(batch)) * np.where(inside, dkl, 0.0)
        return loss - alpha * div, self.online.backward(dq), div

    # -- training ------------------------------------------------------------

    def sync_target(self) -> None:
        self.target.load_params_from(self.online)
        self._since_sync = 0

    def update(self, batch: Batch):
        if self.diversity:
            self.scheduler.at_step(self.total_steps)
            loss, grads, dist = self.div_dqn_loss(batch)
        else:
            loss, grads = self.dqn_loss(batch)
            dist = 0.0
        self.opt.step(grads)
        if self.diversity:
            self.scheduler.distance_update(dist)
        self.updates += 1
        self._since_sync += 1
        if self._since_sync >= self.target_sync:
            self.sync_target()
        return loss, dist

    def train_episode(self, env, replay: ReplayBuffer, rng: np.random.Generator, visits=None, max_steps=None) -> EpisodeStats:
        t0 = time.perf_counter()
        env.reset()
        obs = env.observe()
        total, steps, losses, dists = 0.0, 0, [], []
        done = False
        while not done:
            if visits is not None:
                visits.record_visit(env.state)
            a, q = self.act(obs, rng)
            res = env.step(a)
            obs2 = env.observe()
            replay.add(obs, a, res.reward, obs2, res.info["terminal"], q)
            total += res.reward
            steps += 1
            self.total_steps += 1
            done = res.done or (max_steps is not None and steps >= max_steps)
            obs = obs2
            if self.total_steps >= self.learning_starts and self.total_steps % self.train_freq == 0:
                loss, dist = self.update(replay.sample_batch(self.batch_size, rng))
                losses.append(loss)
                dists.append(dist)
        return EpisodeStats(
            total, steps,
            float(np.mean(losses)) if losses else 0.0,
            self.scheduler.alpha if self.diversity else 0.0,
            (time.perf_counter() - t0) * 1e3,
            float(np.mean(dists)) if dists else 0.0,
        )

    def nets(self) -> dict:
        return {"online": self.online, "target": self.target}
