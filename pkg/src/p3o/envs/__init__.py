"""Environment registry; instances are selected by string id."""

from __future__ import annotations

from .base import Env
from .circle import PointCircle
from .gather import GridGather
from .navigation import TwoConstraintNavigation
from .spread import ParticleSpread
from .tabular import TabularCmdp, TabularEnv, load_tabular, save_tabular, tabular_rollout

SINGLE_AGENT_IDS = ("point_circle", "grid_gather", "navigation2")
MULTI_AGENT_IDS = ("particle_spread",)


def make(env_id: str, seed: int = 0, horizon: int | None = None, cost_limits=None):
    """Build an environment from its string id.

    ``tabular:<file>`` loads a :class:`TabularCmdp` from the given path and
    wraps it with one-hot observations.
    """
    kwargs = {}
    if horizon is not None:
        kwargs["horizon"] = horizon
    if env_id == "point_circle":
        if cost_limits is not None:
            kwargs["cost_limit"] = float(cost_limits[0])
        return PointCircle(seed=seed, **kwargs)
    if env_id == "grid_gather":
        if cost_limits is not None:
            kwargs["cost_limit"] = float(cost_limits[0])
        return GridGather(seed=seed, **kwargs)
    if env_id == "navigation2":
        if cost_limits is not None:
            kwargs["cost_limits"] = tuple(float(d) for d in cost_limits)
        return TwoConstraintNavigation(seed=seed, **kwargs)
    if env_id == "particle_spread":
        if cost_limits is not None:
            kwargs["cost_limit"] = float(cost_limits[0])
        return ParticleSpread(seed=seed, **kwargs)
    if env_id.startswith("tabular:"):
        cmdp = load_tabular(env_id.split(":", 1)[1])
        if cost_limits is not None:
            kwargs["cost_limits"] = tuple(float(d) for d in cost_limits)
        return TabularEnv(cmdp, seed=seed, **kwargs)
    raise KeyError(
        f"unknown env id {env_id!r}; expected one of "
        f"{SINGLE_AGENT_IDS + MULTI_AGENT_IDS} or tabular:<file>"
    )


__all__ = [
    "Env",
    "PointCircle",
    "GridGather",
    "TwoConstraintNavigation",
    "ParticleSpread",
    "TabularCmdp",
    "TabularEnv",
    "load_tabular",
    "save_tabular",
    "tabular_rollout",
    "make",
    "SINGLE_AGENT_IDS",
    "MULTI_AGENT_IDS",
]
