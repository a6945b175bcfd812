"""Grid foraging task: collect apples, avoid bombs.

Entering an apple cell pays +1 reward; entering a bomb cell pays -1
reward AND +1 cost (the object is consumed either way).  8 of each spawn
per episode on a 12x12 grid.  The observation is a 5x5 egocentric patch
(two channels: apples, bombs) plus the agent's scaled coordinates.
"""

from __future__ import annotations

import numpy as np

from ..cmdp import CmdpSpec
from .base import Env

MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1], [0, 0]])  # up, down, left, right, stay
PATCH = 2  # egocentric half-width


class GridGather(Env):
    def __init__(
        self,
        seed: int = 0,
        size: int = 12,
        n_items: int = 8,
        horizon: int = 100,
        cost_limit: float = 0.5,
    ) -> None:
        super().__init__(seed)
        self.size = size
        self.n_items = n_items
        self.agent = np.zeros(2, dtype=np.intp)
        self.apples: set[tuple[int, int]] = set()
        self.bombs: set[tuple[int, int]] = set()
        side = 2 * PATCH + 1
        self.spec = CmdpSpec(
            obs_dim=2 * side * side + 2,
            action_dim=None,
            n_actions=5,
            n_costs=1,
            gamma=0.99,
            cost_limits=(cost_limit,),
            horizon=horizon,
        )

    def reset(self) -> np.ndarray:
        self._t = 0
        self.agent = np.array([self.size // 2, self.size // 2], dtype=np.intp)
        cells = [
            (r, c)
            for r in range(self.size)
            for c in range(self.size)
            if (r, c) != tuple(self.agent)
        ]
        picks = self._rng.choice(len(cells), size=2 * self.n_items, replace=False)
        self.apples = {cells[i] for i in picks[: self.n_items]}
        self.bombs = {cells[i] for i in picks[self.n_items :]}
        return self._obs()

    def _obs(self) -> np.ndarray:
        side = 2 * PATCH + 1
        patch = np.zeros((2, side, side))
        r0, c0 = self.agent
        for dr in range(-PATCH, PATCH + 1):
            for dc in range(-PATCH, PATCH + 1):
                cell = (r0 + dr, c0 + dc)
                if cell in self.apples:
                    patch[0, dr + PATCH, dc + PATCH] = 1.0
                elif cell in self.bombs:
                    patch[1, dr + PATCH, dc + PATCH] = 1.0
        coords = self.agent / (self.size - 1)
        return np.concatenate([patch.reshape(-1), coords])

    def step(self, action):
        move = MOVES[int(action)]
        self.agent = np.clip(self.agent + move, 0, self.size - 1)
        cell = tuple(self.agent)
        reward, cost = 0.0, 0.0
        if cell in self.apples:
            self.apples.discard(cell)
            reward = 1.0
        elif cell in self.bombs:
            self.bombs.discard(cell)
            reward, cost = -1.0, 1.0
        self._t += 1
        truncated = self._t >= self.spec.horizon
        return self._obs(), reward, np.array([cost]), False, truncated
