"""Cooperative spread task for three agents on a unit arena.

Each step the team is rewarded with the negative sum of distances from
agent i to endpoint i, and pays a single shared cost of +1 if ANY pair of
agents sits closer than the collision radius (once per step, however many
pairs overlap).  Observations are local: own position, endpoints relative
to self, other agents relative to self.
"""

from __future__ import annotations

import numpy as np

from ..cmdp import CmdpSpec

MOVES = np.array([[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
N_AGENTS = 3
STEP_SIZE = 0.08
COLLISION_RADIUS = 0.15


class ParticleSpread:
    """Multi-agent env: list-of-obs in, list-of-actions out, shared signals."""

    n_agents = N_AGENTS

    def __init__(self, seed: int = 0, horizon: int = 25, cost_limit: float = 0.5) -> None:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self.agents = np.zeros((N_AGENTS, 2))
        self.endpoints = np.zeros((N_AGENTS, 2))
        self.agent_spec = CmdpSpec(
            obs_dim=2 + 2 * N_AGENTS + 2 * (N_AGENTS - 1),
            action_dim=None,
            n_actions=5,
            n_costs=1,
            gamma=0.99,
            cost_limits=(cost_limit,),
            horizon=horizon,
        )

    def reset(self) -> list[np.ndarray]:
        self._t = 0
        self.agents = self._rng.uniform(0.0, 1.0, size=(N_AGENTS, 2))
        self.endpoints = self._rng.uniform(0.0, 1.0, size=(N_AGENTS, 2))
        return self.observations()

    def observations(self) -> list[np.ndarray]:
        obs = []
        for i in range(N_AGENTS):
            own = self.agents[i]
            rel_end = (self.endpoints - own).reshape(-1)
            rel_other = (np.delete(self.agents, i, axis=0) - own).reshape(-1)
            obs.append(np.concatenate([own, rel_end, rel_other]))
        return obs

    def _shared_signals(self) -> tuple[float, float]:
        reward = -float(np.linalg.norm(self.endpoints - self.agents, axis=1).sum())
        collided = 0.0
        for i in range(N_AGENTS):
            for j in range(i + 1, N_AGENTS):
                if np.linalg.norm(self.agents[i] - self.agents[j]) < COLLISION_RADIUS:
                    collided = 1.0
        return reward, collided

    def step(self, actions):
        if len(actions) != N_AGENTS:
            raise ValueError(f"need {N_AGENTS} actions")
        deltas = MOVES[np.asarray(actions, dtype=np.intp)] * STEP_SIZE
        self.agents = np.clip(self.agents + deltas, 0.0, 1.0)
        reward, cost = self._shared_signals()
        self._t += 1
        truncated = self._t >= self.agent_spec.horizon
        return self.observations(), reward, np.array([cost]), False, truncated
