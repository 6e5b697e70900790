"""Scaling rules for the diversity weight alpha, plus the distance clip."""

from __future__ import annotations

from dataclasses import dataclass

UP_FACTOR = 1.01
DOWN_FACTOR = 0.99


def linear_alpha(alpha0: float, t: float, total: float) -> float:
    if total <= 0:
        raise ValueError("total steps must be positive")
    if t >= total:
        return 0.0
    return alpha0 * (1.0 - max(t, 0) / total)


def clip_distance(d, c: float):
    if c <= 0:
        raise ValueError("clip constant must be positive")
    return min(max(d, -c), c)


def performance_alpha(p: float, p_min: float, p_max: float, mode: str) -> float:
    """Per-snapshot weight from normalised snapshot performance.

    proactive maps to [-1, 1] (negative weights pull the current policy toward
    strong snapshots), reactive maps to [0, 1].
    """
    if mode not in ("proactive", "reactive"):
        raise ValueError(f"unknown performance mode {mode!r}")
    if not p_min <= p <= p_max:
        raise ValueError(f"performance {p} outside [{p_min}, {p_max}]")
    if p_max == p_min:
        return 0.0
    reactive = 1.0 - (p - p_min) / (p_max - p_min)
    if mode == "proactive":
        # same as -(2 * frac - 1); written via reactive so the two agree exactly
        return 2.0 * reactive - 1.0
    return reactive


@dataclass
class AlphaScheduler:
    """Current alpha under one of: fixed, linear, distance."""

    mode: str = "distance"
    alpha0: float = 0.1
    delta: float = 0.05
    total_steps: int = 1
    alpha_min: float = 1e-4
    alpha_max: float = 1.0

    def __post_init__(self):
        if self.mode not in ("fixed", "linear", "distance"):
            raise ValueError(f"unknown alpha mode {self.mode!r}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")
        if self.mode == "distance" and not 0 <= self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 <= alpha_min <= alpha_max")
        if self.mode == "linear" and self.total_steps <= 0:
            raise ValueError("linear mode needs total_steps > 0")
        self.alpha = self.alpha0
        if self.mode == "distance":
            self.alpha = min(max(self.alpha, self.alpha_min), self.alpha_max)

    def distance_update(self, mean_distance: float) -> float:
        if self.mode != "distance":
            return self.alpha
        a = self.alpha * (UP_FACTOR if mean_distance <= self.delta else DOWN_FACTOR)
        self.alpha = min(max(a, self.alpha_min), self.alpha_max)
        return self.alpha

    def at_step(self, t: int) -> float:
        if self.mode == "linear":
            self.alpha = linear_alpha(self.alpha0, t, self.total_steps)
        return self.alpha


def distance_update(sched: AlphaScheduler, mean_distance: float) -> float:
    return sched.distance_update(mean_distance)
