"""Shared test oracles: finite differences and gradient comparison."""

from __future__ import annotations

import numpy as np

from p3o.nn import ParamStore

FD_STEP = 1e-5


def finite_diff_grads(loss_fn, store: ParamStore, h: float = FD_STEP) -> dict[str, np.ndarray]:
    """Central-difference gradients of a scalar loss over every parameter."""
    grads: dict[str, np.ndarray] = {}
    for name, p in store.params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(store)
            flat[i] = orig - h
            down = loss_fn(store)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def assert_grads_close(analytic: dict, numeric: dict, rel: float = 1e-4, small_abs: float = 1e-7):
    """Elementwise: relative error <= rel, or absolute <= small_abs for tiny gradients."""
    assert set(analytic) == set(numeric)
    for name in numeric:
        a = np.asarray(analytic[name]).ravel()
        n = np.asarray(numeric[name]).ravel()
        for ai, ni in zip(a, n):
            if abs(ni) < 1e-3:
                assert abs(ai - ni) <= max(small_abs, rel * abs(ni)), (name, ai, ni)
            else:
                assert abs(ai - ni) <= rel * abs(ni), (name, ai, ni)
