"""Synchronous advantage actor-critic, plain and diversity-regularised.

Div-A2C keeps a ring of the five most recent frozen policies. Each snapshot
carries its greedy evaluation return, which sets a per-snapshot weight
(proactive or reactive); that weight is multiplied by a global alpha that
follows the distance-based rule.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import Mlp, Optimizer, entropy, log_softmax, softmax, softmax_kl
from .scaling import AlphaScheduler, performance_alpha

RING_SIZE = 5
EVAL_EPISODES = 5


@dataclass(frozen=True)
class PolicySnapshot:
    net: Mlp
    performance: float
    step: int


@dataclass
class Rollout:
    obs: np.ndarray  # (T, W, obs_dim)
    actions: np.ndarray  # (T, W)
    rewards: np.ndarray
    terminals: np.ndarray
    truncated: np.ndarray
    values: np.ndarray
    logits: np.ndarray  # (T, W, n_actions)
    final_values: np.ndarray  # V(s') at truncation points (0 elsewhere)
    bootstrap: np.ndarray  # V of the observation after the last step, per worker

    def flat(self):
        T, W = self.actions.shape
        return self.obs.reshape(T * W, -1), self.actions.reshape(-1)


def n_step_returns(rewards, terminals, truncated, final_values, bootstrap, gamma) -> np.ndarray:
    """Backward recursion G_t = r_t + gamma * G_{t+1}, cut at episode ends.

    Terminal steps use G = r; truncated steps bootstrap from the value of
    the state reached before the reset.
    """
    T = rewards.shape[0]
    out = np.zeros_like(rewards, dtype=np.float64)
    g = np.asarray(bootstrap, dtype=np.float64).copy()
    for t in range(T - 1, -1, -1):
        g = np.where(terminals[t], rewards[t], np.where(truncated[t], rewards[t] + gamma * final_values[t], rewards[t] + gamma * g))
        out[t] = g
    return out


class A2cAgent:
    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        hidden=(64, 64),
        lr=7e-4,
        gamma=0.99,
        entropy_coef=0.01,
        value_coef=0.5,
        rollout_len=5,
        diversity="off",
        scheduler: Optional[AlphaScheduler] = None,
        clip_c=10.0,
        snapshot_every=20,
    ):
        if entropy_coef < 0:
            raise ValueError("entropy coefficient must be non-negative")
        if diversity not in ("off", "proactive", "reactive"):
            raise ValueError(f"unknown diversity mode {diversity!r}")
        self.obs_dim, self.n_actions = obs_dim, n_actions
        self.policy_net = Mlp.init([obs_dim, *hidden, n_actions], rng)
        self.value_net = Mlp.init([obs_dim, *hidden, 1], rng)
        self.policy_opt = Optimizer(self.policy_net.flat, lr=lr)
        self.value_opt = Optimizer(self.value_net.flat, lr=lr)
        self.gamma = gamma
        self.entropy_coef = entropy_coef
        self.value_coef = value_coef
        self.rollout_len = rollout_len
        self.diversity = diversity
        self.scheduler = scheduler if scheduler is not None else AlphaScheduler(mode="distance")
        self.clip_c = clip_c
        self.snapshot_every = snapshot_every
        self.ring: deque = deque(maxlen=RING_SIZE)
        self.total_steps = 0
        self.updates = 0
        self._ep_returns = None

    # -- acting --------------------------------------------------------------

    def sample_actions(self, logits, rng: np.random.Generator) -> np.ndarray:
        p = softmax(logits)
        u = rng.random(p.shape[0])
        cdf = np.cumsum(p, axis=1)
        return np.minimum((cdf < u[:, None]).sum(axis=1), self.n_actions - 1)

    def rollout(self, envs, steps: int, rng: np.random.Generator, visits=None, log=None) -> Rollout:
        """Step every worker ``steps`` times in lockstep (auto-reset on done).

        Finished episode returns are appended to ``log`` in worker order.
        """
        W = len(envs)
        if W < 1:
            raise ValueError("need at least one worker")
        if self._ep_returns is None or len(self._ep_returns) != W:
            self._ep_returns = np.zeros(W)
            self._ep_steps = np.zeros(W, dtype=np.int64)
            for e in envs:
                e.reset()
        obs = np.zeros((steps, W, self.obs_dim))
        actions = np.zeros((steps, W), dtype=np.int64)
        rewards = np.zeros((steps, W))
        terminals = np.zeros((steps, W), dtype=bool)
        truncated = np.zeros((steps, W), dtype=bool)
        final_values = np.zeros((steps, W))
        logits = np.zeros((steps, W, self.n_actions))
        cur = np.stack([e.observe() for e in envs])
        for t in range(steps):
            lg = self.policy_net.forward(cur, cache=False)
            a = self.sample_actions(lg, rng)
            obs[t], logits[t], actions[t] = cur, lg, a
            nxt = np.empty_like(cur)
            for w, env in enumerate(envs):
                if visits is not None:
                    visits.record_visit(env.state)
                res = env.step(int(a[w]))
                rewards[t, w] = res.reward
                self._ep_returns[w] += res.reward
                self._ep_steps[w] += 1
                if res.done:
                    terminals[t, w] = res.info["terminal"]
                    truncated[t, w] = not res.info["terminal"]
                    if truncated[t, w]:
                        final_values[t, w] = self.value_net.forward(env.observe(), cache=False)[0]
                    if log is not None:
                        log.append(self._ep_returns[w], int(self._ep_steps[w]))
                    self._ep_returns[w] = 0.0
                    self._ep_steps[w] = 0
                    env.reset()
                nxt[w] = env.observe()
            cur = nxt
            self.total_steps += W
        values = self.value_net.forward(obs.reshape(steps * W, -1), cache=False)[:, 0].reshape(steps, W)
        bootstrap = self.value_net.forward(cur, cache=False)[:, 0]
        return Rollout(obs, actions, rewards, terminals, truncated, values, logits, final_values, bootstrap)

    def returns(self, ro: Rollout) -> np.ndarray:
        return n_step_returns(ro.rewards, ro.terminals, ro.truncated, ro.final_values, ro.bootstrap, self.gamma)

    # -- losses --------------------------------------------------------------

    def _a2c_terms(self, obs, actions, returns, advantages):
        B = len(actions)
        rows = np.arange(B)
        z = self.policy_net.forward(obs)
        v = self.value_net.forward(obs)[:, 0]
        logp = log_softmax(z)
        p = np.exp(logp)
        adv = (returns - v) if advantages is None else np.asarray(advantages, dtype=np.float64)
        h = entropy(p)
        pg = -np.mean(logp[rows, actions] * adv)
        vloss = self.value_coef * np.mean((returns - v) ** 2)
        ent = float(np.mean(h))
        loss = pg + vloss - self.entropy_coef * ent
        onehot = np.zeros_like(p)
        onehot[rows, actions] = 1.0
        dz = -(onehot - p) * adv[:, None] / B
        dz += self.entropy_coef * p * (logp + h[:, None]) / B
        dv = -2.0 * self.value_coef * (returns - v) / B
        info = {"policy_loss": float(pg), "value_loss": float(vloss), "entropy": ent}
        return float(loss), z, dz, self.value_net.backward(dv[:, None]), info

    def a2c_loss(self, obs, actions, returns, advantages=None):
        """Policy-gradient + value-regression - entropy loss.

        ``advantages`` defaults to ``returns - V(obs)`` and is treated as a
        constant. Returns ``(loss, policy_grads, value_grads, info)``.
        """
        loss, _, dz, vgrads, info = self._a2c_terms(obs, actions, returns, advantages)
        return loss, self.policy_net.backward(dz), vgrads, info

    def snapshot_alphas(self) -> np.ndarray:
        """Per-snapshot weights: performance factor times the global alpha."""
        if not self.ring:
            return np.zeros(0)
        perf = [s.performance for s in self.ring]
        lo, hi = min(perf), max(perf)
        return np.array([performance_alpha(p, lo, hi, self.diversity) for p in perf]) * self.scheduler.alpha

    def div_a2c_loss(self, obs, actions, returns, advantages=None, alphas=None):
        """A2C loss minus mean over states and snapshots of
        alpha_k * clip(KL(pi(s) || pi_k(s))).

        Returns ``(loss, policy_grads, value_grads, info)``; ``info`` carries
        the mean clipped KL used by the distance rule.
        """
        loss, z, dz, vgrads, info = self._a2c_terms(obs, actions, returns, advantages)
        n = len(self.ring)
        info["mean_distance"] = 0.0
        info["alphas"] = []
        if n == 0:
            return loss, self.policy_net.backward(dz), vgrads, info
        alphas = self.snapshot_alphas() if alphas is None else np.asarray(alphas, dtype=np.float64)
        B = len(actions)
        c = self.clip_c
        div = 0.0
        dist = 0.0
        for snap, a_k in zip(self.ring, alphas):
            zk = snap.net.forward(obs, cache=False)
            kl, _, dkl = softmax_kl(z, zk)
            clipped = np.clip(kl, -c, c)
            div += a_k * float(np.mean(clipped))
            dist += float(np.mean(clipped))
            dz = dz - (a_k / (n * B)) * np.where((np.abs(kl) < c)[:, None], dkl, 0.0)
        info["mean_distance"] = dist / n
        info["alphas"] = [float(a) for a in alphas]
        return loss - div / n, self.policy_net.backward(dz), vgrads, info

    # -- snapshots -----------------------------------------------------------

    def greedy_return(self, net: Mlp, env) -> float:
        env.reset()
        total, done = 0.0, False
        while not done:
            res = env.step(int(np.argmax(net.forward(env.observe(), cache=False))))
            total += res.reward
            done = res.done
        return total

    def snapshot_policy(self, eval_env) -> PolicySnapshot:
        net = self.policy_net.copy()
        perf = float(np.mean([self.greedy_return(net, eval_env) for _ in range(EVAL_EPISODES)]))
        snap = PolicySnapshot(net, perf, self.total_steps)
        self.ring.append(snap)
        return snap

    # -- training ------------------------------------------------------------

    def update(self, ro: Rollout):
        obs, actions = ro.flat()
        g = self.returns(ro).reshape(-1)
        if self.diversity != "off":
            loss, pgrads, vgrads, info = self.div_a2c_loss(obs, actions, g)
        else:
            loss, pgrads, vgrads, info = self.a2c_loss(obs, actions, g)
        self.policy_opt.step(pgrads)
        self.value_opt.step(vgrads)
        if self.diversity != "off" and self.ring:
            self.scheduler.distance_update(info["mean_distance"])
        self.updates += 1
        info["loss"] = loss
        return info

    def train(self, envs, total_steps: int, rng: np.random.Generator, eval_env=None, visits=None, log=None) -> list:
        """Rollout, update and (Div-A2C) snapshot every ``snapshot_every``
        updates until ``total_steps`` environment steps are consumed."""
        curve = []
        t0 = time.perf_counter()
        while self.total_steps < total_steps:
            ro = self.rollout(envs, self.rollout_len, rng, visits=visits, log=log)
            info = self.update(ro)
            if self.diversity != "off" and eval_env is not None and self.updates % self.snapshot_every == 0:
                self.snapshot_policy(eval_env)
            curve.append({
                "update": self.updates,
                "steps": self.total_steps,
                "loss": info["loss"],
                "entropy": info["entropy"],
                "alpha": self.scheduler.alpha,
                "alphas": info.get("alphas", []),
                "wall_ms": (time.perf_counter() - t0) * 1e3,
            })
        return curve

    def nets(self) -> dict:
        out = {"policy": self.policy_net, "value": self.value_net}
        for k, s in enumerate(self.ring):
            out[f"snapshot{k}"] = s.net
        return out
