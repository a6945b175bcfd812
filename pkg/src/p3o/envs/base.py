"""Environment interface.

Single-agent envs expose ``spec`` (a :class:`~p3o.cmdp.CmdpSpec`),
``reset() -> obs`` and ``step(action) -> (obs, reward, costs, terminated,
truncated)``.  `terminated` marks a true terminal state, `truncated` a
horizon cut; the distinction controls GAE bootstrapping.  All randomness
comes from the env's own generator, so (seed, action sequence) fully
determines every trajectory.
"""

from __future__ import annotations

import numpy as np

from ..cmdp import CmdpSpec


class Env:
    spec: CmdpSpec

    def __init__(self, seed: int = 0) -> None:
        self._rng = np.random.default_rng(seed)
        self._t = 0

    def reset(self) -> np.ndarray:
        raise NotImplementedError

    def step(self, action):
        raise NotImplementedError
