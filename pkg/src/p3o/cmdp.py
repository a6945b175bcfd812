"""CMDP contracts, trajectory storage and the advantage pipeline.

A :class:`RolloutBatch` is assembled from whole episodes and finalized
once: per-step discounted reward/cost returns, GAE advantages for the
reward and every cost channel, and the per-channel episode-cost estimates
that feed the constraint offset of the penalized objective.  Finalized
arrays are read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import dense


@dataclass(frozen=True)
class CmdpSpec:
    """Environment contract: spaces, cost channels, discount and limits.

    Exactly one of `action_dim` (continuous) / `n_actions` (discrete) is set.
    `cost_limits` are undiscounted per-episode budgets by convention; the
    trainer decides how they enter the loss.
    """

    obs_dim: int
    action_dim: int | None
    n_actions: int | None
    n_costs: int
    gamma: float
    cost_limits: tuple[float, ...]
    horizon: int

    def __post_init__(self):
        if (self.action_dim is None) == (self.n_actions is None):
            raise ValueError("exactly one of action_dim / n_actions must be set")
        if self.n_costs < 0:
            raise ValueError("n_costs must be >= 0")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie strictly inside (0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.cost_limits) != self.n_costs:
            raise ValueError("one cost limit per cost channel")
        if any(d < 0 for d in self.cost_limits):
            raise ValueError("cost limits must be >= 0")


@dataclass
class Transition:
    """One step as recorded under the behavior policy."""

    obs: np.ndarray
    action: np.ndarray | int
    log_prob: float
    reward: float
    costs: np.ndarray
    done: bool
    value: float
    cost_values: np.ndarray

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=np.float64)
        self.cost_values = np.asarray(self.cost_values, dtype=np.float64)
        if self.costs.shape != self.cost_values.shape:
            raise ValueError("costs and cost-value predictions must align")
        if not np.isfinite(self.log_prob):
            raise ValueError("log_prob must be finite")


def discounted_return(values, gamma: float) -> np.ndarray:
    """Backward-recursion discounted returns-to-go within one episode."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    acc = 0.0
    for t in range(len(values) - 1, -1, -1):
        acc = values[t] + gamma * acc
        out[t] = acc
    return out


def gae_advantage(rewards, values, gamma: float, lam: float, dones=None) -> np.ndarray:
    """Exponentially weighted TD-residual advantages.

    `values` carries one bootstrap entry beyond the rewards; `dones[t]`
    zeroes both the bootstrap and the recursion across a terminal step.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(
            f"values must have length len(rewards)+1, got {values.shape[0]} vs {rewards.shape[0]}"
        )
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    if dones is None:
        dones = np.zeros_like(rewards)
    else:
        dones = np.asarray(dones, dtype=np.float64)
        if dones.shape != rewards.shape:
            raise ValueError("dones must align with rewards")
    adv = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        acc = delta + gamma * lam * live * acc
        adv[t] = acc
    return adv


def normalize_advantages(adv, mode: str = "full") -> np.ndarray:
    """Map advantages toward a standard scale.

    full: subtract the batch mean and divide by the population std (+1e-8).
    scale_only: divide by the population std only, preserving the mean.
    Degenerate spread (std < 1e-12) yields zeros (full) or the input
    unchanged (scale_only).
    """
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    if mode == "full" and adv.size < 2:
        raise ValueError("full normalization needs at least 2 samples")
    std = float(adv.std())
    if mode == "full":
        if std < 1e-12:
            return np.zeros_like(adv)
        return (adv - adv.mean()) / (std + 1e-8)
    if mode == "scale_only":
        if std < 1e-12:
            return adv.copy()
        return adv / (std + 1e-8)
    raise ValueError(f"unknown normalization mode {mode!r}")


@dataclass
class Episode:
    """One completed episode plus critic bootstraps at its final state."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray  # (T, m)
    values: np.ndarray
    cost_values: np.ndarray  # (T, m)
    terminated: bool  # True: reached a terminal state; False: horizon cut
    bootstrap_value: float = 0.0
    bootstrap_cost_values: np.ndarray = field(default_factory=lambda: np.zeros(0))


class RolloutBatch:
    """Flattened, finalized trajectories with computed returns/advantages."""

    def __init__(self, spec: CmdpSpec, episodes: list[Episode], lam: float) -> None:
        if not episodes:
            raise ValueError("RolloutBatch needs at least one complete episode")
        m = spec.n_costs
        gamma = spec.gamma
        self.spec = spec
        self.episode_slices: list[tuple[int, int, bool]] = []
        obs, actions, logp, rewards, costs, values, cost_values, dones = (
            [], [], [], [], [], [], [], [])
        reward_returns, cost_returns, adv_r, adv_c = [], [], [], []
        ep_disc_costs = np.zeros((len(episodes), m))
        ep_undisc_costs = np.zeros((len(episodes), m))
        ep_returns = np.zeros(len(episodes))
        start = 0
        for e_idx, ep in enumerate(episodes):
            T = len(ep.rewards)
            obs.append(ep.obs)
            actions.append(ep.actions)
            logp.append(ep.log_probs)
            rewards.append(ep.rewards)
            costs.append(ep.costs)
            values.append(ep.values)
            cost_values.append(ep.cost_values)
            done_row = np.zeros(T)
            done_row[-1] = 1.0 if ep.terminated else 0.0
            dones.append(done_row)
            reward_returns.append(discounted_return(ep.rewards, gamma))
            cost_returns.append(
                np.stack([discounted_return(ep.costs[:, i], gamma) for i in range(m)], axis=1)
                if m
                else np.zeros((T, 0))
            )
            boot_v = 0.0 if ep.terminated else float(ep.bootstrap_value)
            adv_r.append(
                gae_advantage(ep.rewards, np.append(ep.values, boot_v), gamma, lam)
            )
            if m:
                boot_c = np.zeros(m) if ep.terminated else np.asarray(ep.bootstrap_cost_values)
                adv_c.append(
                    np.stack(
                        [
                            gae_advantage(
                                ep.costs[:, i],
                                np.append(ep.cost_values[:, i], boot_c[i]),
                                gamma,
                                lam,
                            )
                            for i in range(m)
                        ],
                        axis=1,
                    )
                )
            else:
                adv_c.append(np.zeros((T, 0)))
            disc = np.power(gamma, np.arange(T))
            for i in range(m):
                ep_disc_costs[e_idx, i] = float(disc @ ep.costs[:, i])
                ep_undisc_costs[e_idx, i] = float(ep.costs[:, i].sum())
            ep_returns[e_idx] = float(ep.rewards.sum())
            self.episode_slices.append((start, start + T, ep.terminated))
            start += T

        self.obs = np.concatenate(obs, axis=0)
        self.actions = np.concatenate(actions, axis=0)
        self.log_probs = np.concatenate(logp)
        self.rewards = np.concatenate(rewards)
        self.costs = np.concatenate(costs, axis=0)
        self.values = np.concatenate(values)
        self.cost_values = np.concatenate(cost_values, axis=0)
        self.dones = np.concatenate(dones)
        self.reward_returns = np.concatenate(reward_returns)
        self.cost_returns = np.concatenate(cost_returns, axis=0)
        self.adv_reward = np.concatenate(adv_r)
        self.adv_costs = np.concatenate(adv_c, axis=0)
        self.j_cost_disc = ep_disc_costs.mean(axis=0)
        self.j_cost_undisc = ep_undisc_costs.mean(axis=0)
        self.ep_cost_mean = self.j_cost_undisc  # logged threshold scale
        self.ep_return_mean = float(ep_returns.mean())
        self.n_episodes = len(episodes)
        if not np.all(np.isfinite(self.j_cost_disc)):
            raise ValueError("episode cost estimates must be finite")
        for arr in (
            self.obs, self.actions, self.log_probs, self.rewards, self.costs,
            self.values, self.cost_values, self.dones, self.reward_returns,
            self.cost_returns, self.adv_reward, self.adv_costs,
        ):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.rewards)


def estimate_cost_return(batch: RolloutBatch, channel: int, discounted: bool = True) -> float:
    """Mean per-episode cost-return for one channel."""
    if not (0 <= channel < batch.spec.n_costs):
        raise KeyError(f"unknown cost channel {channel}")
    gamma = batch.spec.gamma
    totals = []
    for start, stop, _ in batch.episode_slices:
        c = batch.costs[start:stop, channel]
        if discounted:
            totals.append(float(np.power(gamma, np.arange(stop - start)) @ c))
        else:
            totals.append(float(c.sum()))
    return float(np.mean(totals))


ROLLOUT_DUMP_FIELDS = (
    "episode step done reward costs value cost_values log_prob obs action"
)


def dump_rollout(batch: RolloutBatch, path) -> None:
    """Debug dump, one line per transition.

    Field order per line (space-separated, vectors comma-joined):
    episode index, step index, done flag, reward, costs, value prediction,
    cost-value predictions, behavior log-prob, observation, action.
    """

    def fmt(x) -> str:
        arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return ",".join(repr(float(v)) for v in arr)

    with open(path, "w") as fh:
        fh.write(f"# rollout-dump v1: {ROLLOUT_DUMP_FIELDS}\n")
        for e_idx, (start, stop, _) in enumerate(batch.episode_slices):
            for t in range(start, stop):
                fh.write(
                    " ".join(
                        [
                            str(e_idx),
                            str(t - start),
                            str(int(batch.dones[t])),
                            repr(float(batch.rewards[t])),
                            fmt(batch.costs[t]),
                            repr(float(batch.values[t])),
                            fmt(batch.cost_values[t]),
                            repr(float(batch.log_probs[t])),
                            fmt(batch.obs[t]),
                            fmt(batch.actions[t]),
                        ]
                    )
                    + "\n"
                )


__all__ = [
    "CmdpSpec",
    "Transition",
    "Episode",
    "RolloutBatch",
    "discounted_return",
    "gae_advantage",
    "normalize_advantages",
    "estimate_cost_return",
    "dump_rollout",
    "dense",
]
