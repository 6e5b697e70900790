"""Finite-difference checks of every analytic loss gradient on random
tiny nets and batches."""

from __future__ import annotations

import numpy as np

from .a2c import A2cAgent, PolicySnapshot
from .ddpg import DdpgAgent
from .dqn import DqnAgent
from .nn import Mlp, gradient_check, max_relative_error, numeric_gradient
from .replay import Batch

TOLERANCE = 1e-4


def _flat(grads):
    return np.concatenate([np.ravel(g) for g in grads])


def _check(net_flat, analytic, loss_fn):
    numeric = numeric_gradient([net_flat], loss_fn)
    return max_relative_error([_flat(analytic)], numeric)


def random_discrete_batch(rng, obs_dim, n_actions, size, prior=True):
    return Batch(
        obs=rng.uniform(-1, 1, (size, obs_dim)),
        actions=rng.integers(0, n_actions, size),
        rewards=rng.uniform(-1, 1, size),
        next_obs=rng.uniform(-1, 1, (size, obs_dim)),
        dones=rng.random(size) < 0.3,
        prior_q=rng.normal(0, 1, (size, n_actions)) if prior else None,
    )


def _tiny_dqn(rng):
    obs_dim, n_actions = int(rng.integers(1, 4)), int(rng.integers(2, 5))
    hidden = tuple(int(h) for h in rng.integers(2, 7, size=int(rng.integers(1, 3))))
    agent = DqnAgent(obs_dim, n_actions, rng, hidden=hidden, gamma=float(rng.uniform(0.5, 1.0)), clip_c=10.0)
    agent.target.flat[...] = agent.target.flat + rng.normal(0, 0.3, agent.target.flat.shape)
    return agent, random_discrete_batch(rng, obs_dim, n_actions, int(rng.integers(1, 8)))


def check_dqn(rng) -> float:
    agent, batch = _tiny_dqn(rng)
    _, grads = agent.dqn_loss(batch)
    return _check(agent.online.flat, grads, lambda: agent.dqn_loss(batch)[0])


def check_div_dqn(rng) -> float:
    agent, batch = _tiny_dqn(rng)
    alpha = float(rng.uniform(0.05, 2.0))
    _, grads, _ = agent.div_dqn_loss(batch, alpha=alpha)
    return _check(agent.online.flat, grads, lambda: agent.div_dqn_loss(batch, alpha=alpha)[0])


def _tiny_ddpg(rng):
    obs_dim, act_dim = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    hidden = tuple(int(h) for h in rng.integers(2, 7, size=int(rng.integers(1, 3))))
    agent = DdpgAgent(obs_dim, act_dim, rng, hidden=hidden, gamma=float(rng.uniform(0.5, 1.0)), diversity=True)
    for net in (agent.actor_target, agent.critic_target):
        net.flat[...] = net.flat + rng.normal(0, 0.3, net.flat.shape)
    size = int(rng.integers(1, 8))
    batch = Batch(
        obs=rng.uniform(-1, 1, (size, obs_dim)),
        actions=rng.uniform(-1, 1, (size, act_dim)),
        rewards=rng.uniform(-1, 1, size),
        next_obs=rng.uniform(-1, 1, (size, obs_dim)),
        dones=rng.random(size) < 0.3,
    )
    return agent, batch


def check_critic(rng) -> float:
    agent, batch = _tiny_ddpg(rng)
    _, grads = agent.critic_loss(batch)
    return _check(agent.critic.flat, grads, lambda: agent.critic_loss(batch)[0])


def check_actor(rng) -> float:
    agent, batch = _tiny_ddpg(rng)
    _, grads = agent.actor_loss(batch)
    return _check(agent.actor.flat, grads, lambda: agent.actor_loss(batch)[0])


def check_div_actor(rng) -> float:
    agent, batch = _tiny_ddpg(rng)
    alpha = float(rng.uniform(0.05, 2.0))
    _, grads, _ = agent.div_actor_loss(batch, alpha=alpha)
    return _check(agent.actor.flat, grads, lambda: agent.div_actor_loss(batch, alpha=alpha)[0])


def _tiny_a2c(rng, mode="off"):
    obs_dim, n_actions = int(rng.integers(1, 4)), int(rng.integers(2, 5))
    hidden = tuple(int(h) for h in rng.integers(2, 7, size=int(rng.integers(1, 3))))
    agent = A2cAgent(obs_dim, n_actions, rng, hidden=hidden, entropy_coef=float(rng.uniform(0, 0.5)), diversity=mode)
    size = int(rng.integers(1, 9))
    obs = rng.uniform(-1, 1, (size, obs_dim))
    actions = rng.integers(0, n_actions, size)
    returns = rng.uniform(-1, 1, size)
    adv = returns - agent.value_net.forward(obs, cache=False)[:, 0]
    return agent, obs, actions, returns, adv


def _a2c_joint_check(agent, loss_fn):
    _, pgrads, vgrads, _ = loss_fn()
    joint = np.concatenate([agent.policy_net.flat, agent.value_net.flat])
    n = agent.policy_net.flat.size

    def f():
        agent.policy_net.flat[...] = joint[:n]
        agent.value_net.flat[...] = joint[n:]
        return loss_fn()[0]

    numeric = numeric_gradient([joint], f)
    f()
    return max_relative_error([np.concatenate([_flat(pgrads), _flat(vgrads)])], numeric)


def check_a2c(rng) -> float:
    agent, obs, actions, returns, adv = _tiny_a2c(rng)
    return _a2c_joint_check(agent, lambda: agent.a2c_loss(obs, actions, returns, advantages=adv))


def check_div_a2c(rng) -> float:
    agent, obs, actions, returns, adv = _tiny_a2c(rng, mode="proactive")
    for k in range(int(rng.integers(1, 6))):
        snap = agent.policy_net.copy()
        snap.flat[...] = snap.flat + rng.normal(0, 0.5, snap.flat.shape)
        agent.ring.append(PolicySnapshot(snap, 0.0, k))
    alphas = rng.uniform(-1, 1, len(agent.ring))
    return _a2c_joint_check(agent, lambda: agent.div_a2c_loss(obs, actions, returns, advantages=adv, alphas=alphas))


def check_mlp(rng) -> float:
    sizes = [int(s) for s in rng.integers(1, 9, size=int(rng.integers(2, 5)))]
    net = Mlp.init(sizes, rng, hidden=str(rng.choice(["tanh", "identity"])))
    x = rng.normal(0, 1, (int(rng.integers(1, 6)), sizes[0]))
    target = rng.normal(0, 1, (x.shape[0], sizes[-1]))
    return gradient_check(net, x, lambda out: (float(np.sum((out - target) ** 2)), 2.0 * (out - target)))


CHECKS = {
    "mlp_backprop": check_mlp,
    "dqn_td_loss": check_dqn,
    "ddpg_critic_loss": check_critic,
    "ddpg_actor_loss": check_actor,
    "a2c_loss": check_a2c,
    "div_dqn_loss": check_div_dqn,
    "div_ddpg_actor_loss": check_div_actor,
    "div_a2c_loss": check_div_a2c,
}


def run_suite(trials=100, seed=0):
    """Yield ``(name, worst relative error over trials)`` per loss."""
    for k, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        yield name, max(fn(rng) for _ in range(trials))
