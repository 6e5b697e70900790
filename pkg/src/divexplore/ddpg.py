"""DDPG and Div-DDPG for continuous actions.

The actor works in normalised action units: its tanh output lies in
[-1, 1] and is multiplied by ``action_scale`` before reaching the
environment. Replay stores the normalised action, which is also the prior
action the diversity term measures against.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .dqn import EpisodeStats
from .nn import Mlp, Optimizer
from .replay import Batch, ReplayBuffer
from .scaling import AlphaScheduler


def ou_noise_step(x, theta, sigma, rng: np.random.Generator) -> np.ndarray:
    """One Euler step of a zero-mean Ornstein-Uhlenbeck process (dt = 1)."""
    x = np.asarray(x, dtype=np.float64)
    return x + theta * (0.0 - x) + sigma * rng.standard_normal(x.shape)


class OUNoise:
    def __init__(self, dim, theta=0.15, sigma=0.2):
        self.theta, self.sigma = theta, sigma
        self.state = np.zeros(dim)

    def reset(self):
        self.state = np.zeros_like(self.state)

    def __call__(self, rng):
        self.state = ou_noise_step(self.state, self.theta, self.sigma, rng)
        return self.state


class GaussianNoise:
    def __init__(self, dim, sigma=0.1):
        self.dim, self.sigma = dim, sigma

    def reset(self):
        pass

    def __call__(self, rng):
        return self.sigma * rng.standard_normal(self.dim)


class DdpgAgent:
    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        action_scale=1.0,
        hidden=(64, 64),
        actor_lr=1e-3,
        critic_lr=1e-3,
        gamma=0.99,
        tau=0.005,
        batch_size=64,
        learning_starts=500,
        noise="ou",
        ou_theta=0.15,
        ou_sigma=0.2,
        gauss_sigma=0.1,
        diversity=False,
        scheduler: Optional[AlphaScheduler] = None,
        clip_c=10.0,
    ):
        if not 0 < gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= tau <= 1:
            raise ValueError("tau must lie in [0, 1]")
        self.obs_dim, self.action_dim = obs_dim, action_dim
        self.action_scale = action_scale
        self.actor = Mlp.init([obs_dim, *hidden, action_dim], rng, output="tanh")
        self.critic = Mlp.init([obs_dim + action_dim, *hidden, 1], rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Optimizer(self.actor.flat, lr=actor_lr)
        self.critic_opt = Optimizer(self.critic.flat, lr=critic_lr)
        self.gamma, self.tau = gamma, tau
        self.batch_size = batch_size
        self.learning_starts = learning_starts
        self.diversity = diversity
        # the diversity variant explores through its loss alone
        if diversity or noise in (None, "none"):
            self.noise = None
        elif noise == "ou":
            self.noise = OUNoise(action_dim, ou_theta, ou_sigma)
        elif noise == "gaussian":
            self.noise = GaussianNoise(action_dim, gauss_sigma)
        else:
            raise ValueError(f"unknown noise {noise!r}")
        self.scheduler = scheduler if scheduler is not None else AlphaScheduler(mode="fixed", alpha0=0.0)
        self.clip_c = clip_c
        self.total_steps = 0
        self.updates = 0

    def policy(self, obs) -> np.ndarray:
        return self.actor.forward(obs, cache=False)

    def act(self, obs, rng: np.random.Generator, explore=True) -> np.ndarray:
        a = self.policy(obs)
        if explore and self.noise is not None:
            a = np.clip(a + self.noise(rng), -1.0, 1.0)
        return a

    # -- losses --------------------------------------------------------------

    def critic_loss(self, batch: Batch):
        a_next = self.actor_target.forward(batch.next_obs, cache=False)
        q_next = self.critic_target.forward(np.hstack([batch.next_obs, a_next]), cache=False)[:, 0]
        y = batch.rewards + self.gamma * np.where(batch.dones, 0.0, q_next)
        q = self.critic.forward(np.hstack([batch.obs, batch.actions]))[:, 0]
        td = q - y
        grads = self.critic.backward((2.0 / len(batch)) * td[:, None])
        return float(np.mean(td * td)), grads

    def _actor_part(self, batch: Batch):
        a = self.actor.forward(batch.obs)
        q = self.critic.forward(np.hstack([batch.obs, a]))[:, 0]
        _, dinp = self.critic.backward(np.full((len(batch), 1), -1.0 / len(batch)), input_grad=True)
        return a, -float(np.mean(q)), dinp[:, self.obs_dim :]

    def actor_loss(self, batch: Batch):
        """-mean Q(s, pi(s)); gradient reaches the actor through the critic's
        action input while critic weights stay fixed."""
        _, loss, da = self._actor_part(batch)
        return loss, self.actor.backward(da)

    def div_actor_loss(self, batch: Batch, alpha: Optional[float] = None):
        """Actor loss minus alpha * mean clipped MSE(pi(s), a').

        Returns ``(loss, grads, mean_clipped_mse)``.
        """
        alpha = self.scheduler.alpha if alpha is None else alpha
        a, loss, da = self._actor_part(batch)
        diff = a - batch.actions
        d = np.mean(diff * diff, axis=1)
        c = self.clip_c
        clipped = np.clip(d, -c, c)
        div = float(np.mean(clipped))
        inside = (np.abs(d) < c)[:, None]
        da = da - (alpha / len(batch)) * np.where(inside, 2.0 * diff / self.action_dim, 0.0)
        return loss - alpha * div, self.actor.backward(da), div

    # -- training ------------------------------------------------------------

    def soft_update(self) -> None:
        t = self.tau
        for tgt, src in ((self.actor_target, self.actor), (self.critic_target, self.critic)):
            tgt.flat *= 1.0 - t
            tgt.flat += t * src.flat

    def update(self, batch: Batch):
        closs, cgrads = self.critic_loss(batch)
        self.critic_opt.step(cgrads)
        if self.diversity:
            self.scheduler.at_step(self.total_steps)
            aloss, agrads, dist = self.div_actor_loss(batch)
        else:
            aloss, agrads = self.actor_loss(batch)
            dist = 0.0
        self.actor_opt.step(agrads)
        if self.diversity:
            self.scheduler.distance_update(dist)
        self.soft_update()
        self.updates += 1
        return closs, aloss, dist

    def train_episode(self, env, replay: ReplayBuffer, rng: np.random.Generator, max_steps=None) -> EpisodeStats:
        t0 = time.perf_counter()
        env.reset()
        if self.noise is not None:
            self.noise.reset()
        obs = env.observe()
        total, steps, losses, dists = 0.0, 0, [], []
        done = False
        while not done:
            a = self.act(obs, rng)
            res = env.step(self.action_scale * a)
            obs2 = env.observe()
            replay.add(obs, a, res.reward, obs2, res.info["terminal"])
            total += res.reward
            steps += 1
            self.total_steps += 1
            done = res.done or (max_steps is not None and steps >= max_steps)
            obs = obs2
            if self.total_steps >= self.learning_starts:
                closs, _, dist = self.update(replay.sample_batch(self.batch_size, rng))
                losses.append(closs)
                dists.append(dist)
        return EpisodeStats(
            total, steps,
            float(np.mean(losses)) if losses else 0.0,
            self.scheduler.alpha if self.diversity else 0.0,
            (time.perf_counter() - t0) * 1e3,
            float(np.mean(dists)) if dists else 0.0,
        )

    def nets(self) -> dict:
        return {"actor": self.actor, "critic": self.critic, "actor_target": self.actor_target, "critic_target": self.critic_target}
