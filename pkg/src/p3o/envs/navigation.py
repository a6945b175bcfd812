"""Two-constraint point navigation.

Reward is the per-step decrease in distance to the target (so episode
return telescopes to initial minus final distance).  Cost channel 0 fires
inside any traversable hazard disc; channel 1 fires on contact with an
impassable pillar, which also projects the agent back out.  Hazards
cluster near the start, pillars near the target, mirroring the benchmark
narrative: a fresh random policy violates the hazard budget while pillars
only matter once the agent moves with purpose.
"""

from __future__ import annotations

import numpy as np

from ..cmdp import CmdpSpec
from .base import Env

ARENA = 10.0
N_HAZARDS = 6
HAZARD_RADIUS = 0.6
N_PILLARS = 3
PILLAR_RADIUS = 0.4
TARGET_RADIUS = 0.4
DEFAULT_COST_LIMITS = (5.0, 4.0)  # horizon-scaled budgets for (hazards, pillars)


class TwoConstraintNavigation(Env):
    def __init__(
        self,
        seed: int = 0,
        horizon: int = 200,
        dt: float = 0.25,
        cost_limits: tuple[float, float] = DEFAULT_COST_LIMITS,
    ) -> None:
        super().__init__(seed)
        self.dt = dt
        self.pos = np.zeros(2)
        self.target = np.zeros(2)
        self.hazards = np.zeros((N_HAZARDS, 2))
        self.pillars = np.zeros((N_PILLARS, 2))
        self.spec = CmdpSpec(
            obs_dim=12,
            action_dim=2,
            n_actions=None,
            n_costs=2,
            gamma=0.99,
            cost_limits=tuple(cost_limits),
            horizon=horizon,
        )

    def reset(self) -> np.ndarray:
        self._t = 0
        rng = self._rng
        self.pos = np.array([1.2, 5.0]) + rng.uniform(-0.4, 0.4, size=2)
        self.target = np.array([8.8, 5.0]) + rng.uniform(-0.4, 0.4, size=2)
        # hazards blanket the corridor just past the start
        self.hazards = np.column_stack(
            [rng.uniform(1.8, 4.8, size=N_HAZARDS), rng.uniform(3.2, 6.8, size=N_HAZARDS)]
        )
        self.pillars = np.column_stack(
            [rng.uniform(6.0, 7.8, size=N_PILLARS), rng.uniform(3.8, 6.2, size=N_PILLARS)]
        )
        return self._obs()

    def _obs(self) -> np.ndarray:
        rel_h = self.hazards - self.pos
        rel_h = rel_h[np.argsort(np.linalg.norm(rel_h, axis=1))][:3]
        rel_p = self.pillars - self.pos
        rel_p = rel_p[np.argsort(np.linalg.norm(rel_p, axis=1))][:1]
        return np.concatenate(
            [
                self.pos / ARENA,
                (self.target - self.pos) / ARENA,
                rel_h.reshape(-1) / ARENA,
                rel_p.reshape(-1) / ARENA,
            ]
        )

    def step(self, action):
        v = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        before = float(np.linalg.norm(self.target - self.pos))
        new_pos = np.clip(self.pos + self.dt * v, 0.0, ARENA)
        pillar_hit = 0.0
        for center in self.pillars:
            delta = new_pos - center
            dist = float(np.linalg.norm(delta))
            if dist < PILLAR_RADIUS:
                pillar_hit = 1.0
                if dist < 1e-9:
                    delta = np.array([PILLAR_RADIUS, 0.0])
                    dist = PILLAR_RADIUS
                new_pos = center + delta * (PILLAR_RADIUS / dist)
        self.pos = new_pos
        hazard_hit = float(
            np.any(np.linalg.norm(self.hazards - self.pos, axis=1) < HAZARD_RADIUS)
        )
        after = float(np.linalg.norm(self.target - self.pos))
        reward = before - after
        self._t += 1
        terminated = after < TARGET_RADIUS
        truncated = (not terminated) and self._t >= self.spec.horizon
        return self._obs(), reward, np.array([hazard_hit, pillar_hit]), terminated, truncated
