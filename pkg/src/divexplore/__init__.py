"""Diversity-driven exploration for DQN, DDPG and A2C on small numpy nets."""

from .a2c import A2cAgent, PolicySnapshot
from .ddpg import DdpgAgent
from .dqn import DqnAgent
from .envs import GridWorld, GridWorldConfig, PointMass, PointMassConfig
from .metrics import RewardLog, VisitationGrid
from .nn import Mlp, Optimizer
from .replay import ReplayBuffer, Transition
from .scaling import AlphaScheduler

__version__ = "0.1.0"

__all__ = [
    "A2cAgent", "AlphaScheduler", "DdpgAgent", "DqnAgent", "GridWorld", "GridWorldConfig", "Mlp", "Optimizer",
    "PointMass", "PointMassConfig", "PolicySnapshot", "ReplayBuffer", "RewardLog", "Transition", "VisitationGrid",
]
