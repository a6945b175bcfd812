"""Exact quantities on tabular CMDPs via dense matrix solves.

Everything here treats the infinite-horizon discounted criterion: values
from ``(I - gamma P_pi) V = r_pi``, discounted visitation from the matching
geometric series.  Used as ground truth by the verification suite and by
Monte-Carlo cross-checks.
"""

from __future__ import annotations

import numpy as np

from .envs.tabular import TabularCmdp


def transition_matrix(cmdp: TabularCmdp, policy: np.ndarray) -> np.ndarray:
    """State-to-state matrix P_pi[s, s'] = sum_a pi(a|s) P[s, a, s']."""
    return np.einsum("sa,sat->st", policy, cmdp.P)


def policy_values(cmdp: TabularCmdp, policy: np.ndarray, table: np.ndarray) -> np.ndarray:
    """V_f^pi for an (S, A) immediate-value table f."""
    r_pi = (policy * table).sum(axis=1)
    P_pi = transition_matrix(cmdp, policy)
    return np.linalg.solve(np.eye(cmdp.n_states) - cmdp.gamma * P_pi, r_pi)


def policy_return(cmdp: TabularCmdp, policy: np.ndarray, table: np.ndarray) -> float:
    """J_f(pi) = E_{s0 ~ mu} V_f^pi(s0)."""
    return float(cmdp.mu @ policy_values(cmdp, policy, table))


def action_values(cmdp: TabularCmdp, policy: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Q_f^pi(s, a) = f(s, a) + gamma sum_s' P V_f^pi(s')."""
    V = policy_values(cmdp, policy, table)
    return table + cmdp.gamma * cmdp.P @ V


def advantages(cmdp: TabularCmdp, policy: np.ndarray, table: np.ndarray) -> np.ndarray:
    """A_f^pi(s, a) = Q_f^pi - V_f^pi."""
    Q = action_values(cmdp, policy, table)
    V = (policy * Q).sum(axis=1)
    return Q - V[:, None]


def visitation(cmdp: TabularCmdp, policy: np.ndarray) -> np.ndarray:
    """Discounted state distribution d^pi = (1-gamma) mu^T (I - gamma P_pi)^{-1}."""
    P_pi = transition_matrix(cmdp, policy)
    d = np.linalg.solve(np.eye(cmdp.n_states) - cmdp.gamma * P_pi.T, cmdp.mu)
    return (1.0 - cmdp.gamma) * d


def occupancy(cmdp: TabularCmdp, policy: np.ndarray) -> np.ndarray:
    """Normalized state-action occupancy rho(s, a) = d^pi(s) pi(a|s)."""
    return visitation(cmdp, policy)[:, None] * policy


def greedy_improvement(cmdp: TabularCmdp, policy: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Deterministic policy picking argmax_a A_f^pi(s, a)."""
    adv = advantages(cmdp, policy, table)
    greedy = np.zeros_like(policy)
    greedy[np.arange(cmdp.n_states), adv.argmax(axis=1)] = 1.0
    return greedy


def optimal_return_vi(cmdp: TabularCmdp, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Unconstrained optimum of the reward criterion by value iteration."""
    V = np.zeros(cmdp.n_states)
    for _ in range(max_iter):
        Q = cmdp.R + cmdp.gamma * cmdp.P @ V
        new_V = Q.max(axis=1)
        if np.max(np.abs(new_V - V)) < tol:
            V = new_V
            break
        V = new_V
    return float(cmdp.mu @ V)
