"""Planar circle-running task with a half-plane safety region.

A kinematic point is rewarded for orbiting a circle of radius `radius`
but pays a unit cost whenever it sits right of the vertical line
``x = x_lim`` (one-sided, following the task definition).  Velocity is
the action clamped to the unit box, integrated at `dt`.
"""

from __future__ import annotations

import numpy as np

from ..cmdp import CmdpSpec
from .base import Env

DEFAULT_COST_LIMIT = 10.0  # episode budget at horizon 200 (per-step rate 5%)


def circle_reward_cost(pos: np.ndarray, velocity: np.ndarray, radius: float, x_lim: float):
    """Reward v . [-y, x] / (1 + | ||p|| - radius |) and cost 1[x > x_lim]."""
    x, y = float(pos[0]), float(pos[1])
    reward = (velocity[0] * (-y) + velocity[1] * x) / (1.0 + abs(np.hypot(x, y) - radius))
    cost = 1.0 if x > x_lim else 0.0
    return float(reward), cost


class PointCircle(Env):
    def __init__(
        self,
        seed: int = 0,
        radius: float = 10.0,
        x_lim: float = 3.0,
        dt: float = 0.1,
        horizon: int = 200,
        cost_limit: float = DEFAULT_COST_LIMIT,
    ) -> None:
        super().__init__(seed)
        self.radius = radius
        self.x_lim = x_lim
        self.dt = dt
        self.pos = np.zeros(2)
        self.spec = CmdpSpec(
            obs_dim=2,
            action_dim=2,
            n_actions=None,
            n_costs=1,
            gamma=0.99,
            cost_limits=(cost_limit,),
            horizon=horizon,
        )

    def _obs(self) -> np.ndarray:
        return self.pos / self.radius

    def reset(self) -> np.ndarray:
        self.pos = np.zeros(2)
        self._t = 0
        return self._obs()

    def step(self, action):
        v = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        self.pos = self.pos + self.dt * v
        reward, cost = circle_reward_cost(self.pos, v, self.radius, self.x_lim)
        self._t += 1
        truncated = self._t >= self.spec.horizon
        return self._obs(), reward, np.array([cost]), False, truncated
