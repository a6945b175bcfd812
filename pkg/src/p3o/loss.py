"""The penalized clipped-surrogate objective.

Minimized loss:  L = L_R + kappa * sum_i max(0, L_Ci)  where

  L_R  = mean(-min(r * A_R,  clip(r, 1-eps, 1+eps) * A_R))
  L_Ci = mean( max(r * A_Ci, clip(r, 1-eps, 1+eps) * A_Ci)) + (1-gamma) * (J_Ci - d_i)

with r the importance ratio of the new policy against the behavior
policy.  The rectifier wraps the BATCH-MEAN cost surrogate, so gradients
flow through a cost channel only while its mean surrogate is positive;
with every channel strictly negative the gradient equals the plain
clipped reward objective exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .nn import policy_kl


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty factor, its growth schedule, clipping and the trust region."""

    kappa: float = 20.0
    growth: float = 1.0  # rho; 1 keeps kappa fixed (normalized-advantage mode)
    kappa_max: float = 100.0
    clip_eps: float = 0.2
    kl_lower: float = 0.0  # delta^-
    kl_upper: float = 1e-2  # delta^+

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.kappa > self.kappa_max:
            raise ValueError("kappa must not exceed kappa_max")
        if self.growth < 1.0:
            raise ValueError("growth factor must be >= 1")
        if not (0.0 < self.clip_eps < 1.0):
            raise ValueError("clip ratio must lie in (0, 1)")
        if not (0.0 <= self.kl_lower < self.kl_upper):
            raise ValueError("trust region needs 0 <= lower < upper")


@dataclass
class LossBreakdown:
    """Scalar pieces of one objective evaluation, for logs and tests."""

    reward_surrogate: float
    cost_surrogates: tuple[float, ...]
    penalty_active: tuple[bool, ...]
    kappa: float
    total: float
    mean_kl: float = float("nan")
    clip_fraction: float = float("nan")


def _clipped_pair(ratios: Var, advantages: np.ndarray, eps: float) -> tuple[Var, Var]:
    if np.size(advantages) == 0:
        raise ValueError("empty batch")
    adv = ad.constant(np.asarray(advantages, dtype=np.float64))
    return ad.mul(ratios, adv), ad.mul(ad.clip(ratios, 1.0 - eps, 1.0 + eps), adv)


def reward_surrogate(ratios: Var, adv_reward: np.ndarray, eps: float) -> Var:
    """mean of -min(r*A, clip(r)*A): the pessimistic clipped reward loss."""
    plain, clipped = _clipped_pair(ratios, adv_reward, eps)
    return ad.neg(ad.mean(ad.minimum(plain, clipped)))


def cost_surrogate(
    ratios: Var,
    adv_cost: np.ndarray,
    eps: float,
    j_cost: float,
    d_limit: float,
    gamma: float,
) -> Var:
    """mean of max(r*A_C, clip(r)*A_C) plus the (1-gamma)(J_C - d) offset.

    max, not min: the pessimistic direction for a constraint is upward.
    """
    plain, clipped = _clipped_pair(ratios, adv_cost, eps)
    offset = (1.0 - gamma) * (j_cost - d_limit)
    return ad.add(ad.mean(ad.maximum(plain, clipped)), offset)


def p3o_objective(reward_term: Var, cost_terms: list[Var], kappa: float) -> tuple[Var, LossBreakdown]:
    """Combine the pieces: total = reward + kappa * sum_i relu(cost_i)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    total = reward_term
    for term in cost_terms:
        total = ad.add(total, ad.mul(ad.relu(term), kappa))
    breakdown = LossBreakdown(
        reward_surrogate=float(reward_term.data),
        cost_surrogates=tuple(float(t.data) for t in cost_terms),
        penalty_active=tuple(float(t.data) > 0.0 for t in cost_terms),
        kappa=kappa,
        total=float(total.data),
    )
    return total, breakdown


def mean_kl(head, old_dist_params, new_dist_params) -> float:
    """Closed-form KL(new || old) averaged over the batch states."""
    return policy_kl(head, old_dist_params, new_dist_params)


def clip_fraction(ratios: np.ndarray, eps: float) -> float:
    """Share of samples strictly outside the clip band [1-eps, 1+eps]."""
    r = np.asarray(ratios)
    if r.size == 0:
        return 0.0
    return float(np.mean(np.abs(r - 1.0) > eps))


def update_kappa(cfg: PenaltyConfig) -> PenaltyConfig:
    """kappa' = min(rho * kappa, kappa_max); rho = 1 is the fixed mode."""
    return dataclasses.replace(cfg, kappa=min(cfg.growth * cfg.kappa, cfg.kappa_max))
