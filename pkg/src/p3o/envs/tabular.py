"""Finite CMDPs as explicit tables, with a text format and a gym-style wrapper.

File format (whitespace-separated, ``#`` comments ignored), in this order:

    S A m gamma            header
    mu                     S entries
    P                      S*A rows of S entries, ordered (s=0,a=0), (0,1), ...
    R                      S rows of A entries
    C[i]                   S rows of A entries, for each channel i in order

Rewards/costs are expected immediate values per (state, action).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cmdp import CmdpSpec

ROW_SUM_TOL = 1e-12


@dataclass
class TabularCmdp:
    P: np.ndarray  # (S, A, S)
    R: np.ndarray  # (S, A)
    C: np.ndarray  # (m, S, A)
    mu: np.ndarray  # (S,)
    gamma: float

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64).reshape(-1, *self.R.shape)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        S, A, S2 = self.P.shape
        if S != S2 or self.R.shape != (S, A) or self.mu.shape != (S,):
            raise ValueError("inconsistent table shapes")
        if np.any(np.abs(self.P.sum(axis=2) - 1.0) > ROW_SUM_TOL) or np.any(self.P < 0):
            raise ValueError("every P[s][a] row must be a distribution")
        if abs(self.mu.sum() - 1.0) > ROW_SUM_TOL or np.any(self.mu < 0):
            raise ValueError("mu must be a distribution")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    @property
    def n_costs(self) -> int:
        return self.C.shape[0]


def save_tabular(cmdp: TabularCmdp, path) -> None:
    S, A, m = cmdp.n_states, cmdp.n_actions, cmdp.n_costs
    with open(path, "w") as fh:
        fh.write("# tabular-cmdp v1: header(S A m gamma), mu, P rows (s,a), R, C per channel\n")
        fh.write(f"{S} {A} {m} {cmdp.gamma!r}\n")

        def row(xs):
            return " ".join(repr(float(x)) for x in xs) + "\n"

        fh.write(row(cmdp.mu))
        for s in range(S):
            for a in range(A):
                fh.write(row(cmdp.P[s, a]))
        for s in range(S):
            fh.write(row(cmdp.R[s]))
        for i in range(m):
            for s in range(S):
                fh.write(row(cmdp.C[i, s]))


def load_tabular(path) -> TabularCmdp:
    tokens: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        chunk = np.array([float(t) for t in tokens[pos : pos + n]])
        if chunk.size != n:
            raise ValueError(f"{path}: truncated tabular file")
        pos += n
        return chunk

    S, A, m = int(float(tokens[0])), int(float(tokens[1])), int(float(tokens[2]))
    gamma = float(tokens[3])
    pos = 4
    mu = take(S)
    P = take(S * A * S).reshape(S, A, S)
    R = take(S * A).reshape(S, A)
    C = take(m * S * A).reshape(m, S, A)
    return TabularCmdp(P=P, R=R, C=C, mu=mu, gamma=gamma)


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(min(np.searchsorted(np.cumsum(probs), rng.random(), side="right"), len(probs) - 1))


def tabular_rollout(
    cmdp: TabularCmdp, policy: np.ndarray, horizon: int, rng: np.random.Generator
) -> dict:
    """Sample one trajectory under a (S, A) policy table."""
    policy = np.asarray(policy, dtype=np.float64)
    if policy.shape != (cmdp.n_states, cmdp.n_actions):
        raise ValueError("policy table shape must be (S, A)")
    if np.any(policy < 0) or np.any(np.abs(policy.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("policy rows must be distributions")
    states = np.empty(horizon, dtype=np.intp)
    actions = np.empty(horizon, dtype=np.intp)
    rewards = np.empty(horizon)
    costs = np.empty((horizon, cmdp.n_costs))
    s = _sample(rng, cmdp.mu)
    for t in range(horizon):
        a = _sample(rng, policy[s])
        states[t] = s
        actions[t] = a
        rewards[t] = cmdp.R[s, a]
        costs[t] = cmdp.C[:, s, a]
        s = _sample(rng, cmdp.P[s, a])
    return {"states": states, "actions": actions, "rewards": rewards, "costs": costs}


class TabularEnv:
    """One-hot observation wrapper so the generic trainer can run on tables."""

    def __init__(
        self,
        cmdp: TabularCmdp,
        seed: int = 0,
        horizon: int = 80,
        cost_limits: tuple[float, ...] | None = None,
    ) -> None:
        self.cmdp = cmdp
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self._s = 0
        if cost_limits is None:
            cost_limits = tuple(1.0 for _ in range(cmdp.n_costs))
        self.spec = CmdpSpec(
            obs_dim=cmdp.n_states,
            action_dim=None,
            n_actions=cmdp.n_actions,
            n_costs=cmdp.n_costs,
            gamma=cmdp.gamma,
            cost_limits=cost_limits,
            horizon=horizon,
        )

    def _obs(self) -> np.ndarray:
        one_hot = np.zeros(self.cmdp.n_states)
        one_hot[self._s] = 1.0
        return one_hot

    def reset(self) -> np.ndarray:
        self._t = 0
        self._s = _sample(self._rng, self.cmdp.mu)
        return self._obs()

    def step(self, action):
        a = int(action)
        reward = float(self.cmdp.R[self._s, a])
        costs = self.cmdp.C[:, self._s, a].copy()
        self._s = _sample(self._rng, self.cmdp.P[self._s, a])
        self._t += 1
        truncated = self._t >= self.spec.horizon
        return self._obs(), reward, costs, False, truncated
