"""Parameter stores, small networks, policy heads and a first-order optimizer.

Networks are two-hidden-layer tanh MLPs by default (hidden width is a
config knob; an empty hidden list gives a plain linear map, used by
tabular-softmax policies).  Every forward exists twice: a graph version
operating on bound :class:`~p3o.autodiff.Var` leaves for training, and a
plain-numpy version for fast rollout stepping.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Var, dense

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class ParamStore:
    """Named dense parameters plus per-parameter Adam moments."""

    params: dict[str, np.ndarray] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def add(self, name: str, value: np.ndarray) -> None:
        arr = dense(value, what=f"param {name}")
        self.params[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)

    def clone(self) -> "ParamStore":
        out = ParamStore(step=self.step)
        out.params = {k: v.copy() for k, v in self.params.items()}
        out.m = {k: v.copy() for k, v in self.m.items()}
        out.v = {k: v.copy() for k, v in self.v.items()}
        return out


def bind(store: ParamStore) -> dict[str, Var]:
    """Wrap every parameter as a graph leaf (one leaf per parameter)."""
    return {name: ad.leaf(arr, requires_grad=True) for name, arr in store.params.items()}


def grads_of(bound: Mapping[str, Var]) -> dict[str, np.ndarray]:
    """Gradient map after backward(); unreached parameters get zeros."""
    return {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in bound.items()
    }


def adam_step(
    store: ParamStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place."""
    if lr <= 0:
        raise ValueError("adam_step: lr must be positive")
    store.step += 1
    t = store.step
    for name, g in grads.items():
        p = store.params[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam_step:{name}", g.shape, p.shape)
        if not np.all(np.isfinite(g)):
            raise ValueError(f"adam_step: non-finite gradient for parameter {name!r}")
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ----------------------------------------------------------------- MLP


def init_mlp(store: ParamStore, rng: np.random.Generator, sizes: Iterable[int], prefix: str = "") -> None:
    """Add MLP weights w{i}, b{i}; weights ~ N(0, 1/fan_in), zero biases."""
    sizes = list(sizes)
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        store.add(f"{prefix}w{i}", w)
        store.add(f"{prefix}b{i}", np.zeros(fan_out))


def mlp_sizes(params: Mapping[str, np.ndarray], prefix: str = "") -> list[int]:
    """Recover [in, hidden..., out] from the stored weight shapes."""
    sizes: list[int] = []
    i = 0
    while f"{prefix}w{i}" in params:
        w = params[f"{prefix}w{i}"]
        if not sizes:
            sizes.append(w.shape[0])
        sizes.append(w.shape[1])
        i += 1
    if len(sizes) < 2:
        raise KeyError(f"no MLP parameters under prefix {prefix!r}")
    return sizes


def _check_width(x_shape: tuple, expected: int, layer: str) -> None:
    width = x_shape[-1] if len(x_shape) else 1
    if width != expected:
        raise ShapeError(f"mlp_forward:{layer}", x_shape, (expected,))


def mlp_forward(bound: Mapping[str, Var], x: Var, prefix: str = "") -> Var:
    """Graph forward: tanh hidden layers, affine output."""
    n_layers = sum(1 for name in bound if name.startswith(f"{prefix}w"))
    _check_width(x.shape, bound[f"{prefix}w0"].shape[0], f"{prefix}w0")
    h = x
    for i in range(n_layers):
        h = ad.add(ad.matmul(h, bound[f"{prefix}w{i}"]), bound[f"{prefix}b{i}"])
        if i < n_layers - 1:
            h = ad.tanh(h)
    return h


def mlp_forward_np(store: ParamStore, x: np.ndarray, prefix: str = "") -> np.ndarray:
    """Fast numpy forward with the same semantics as :func:`mlp_forward`."""
    params = store.params
    n_layers = sum(1 for name in params if name.startswith(f"{prefix}w"))
    _check_width(x.shape, params[f"{prefix}w0"].shape[0], f"{prefix}w0")
    h = x
    for i in range(n_layers):
        h = h @ params[f"{prefix}w{i}"] + params[f"{prefix}b{i}"]
        if i < n_layers - 1:
            h = np.tanh(h)
    return h


# ----------------------------------------------------------------- RNN cell


def init_rnn_cell(
    store: ParamStore, rng: np.random.Generator, in_dim: int, hidden_dim: int, prefix: str = ""
) -> None:
    store.add(f"{prefix}wx", rng.standard_normal((in_dim, hidden_dim)) / np.sqrt(in_dim))
    store.add(f"{prefix}wh", rng.standard_normal((hidden_dim, hidden_dim)) / np.sqrt(hidden_dim))
    store.add(f"{prefix}bh", np.zeros(hidden_dim))


def rnn_cell_forward(bound: Mapping[str, Var], x: Var, h: Var, prefix: str = "") -> tuple[Var, Var]:
    """h' = tanh(x Wx + h Wh + b); output is the new hidden state."""
    _check_width(x.shape, bound[f"{prefix}wx"].shape[0], f"{prefix}wx")
    _check_width(h.shape, bound[f"{prefix}wh"].shape[0], f"{prefix}wh")
    new_h = ad.tanh(
        ad.add(
            ad.add(ad.matmul(x, bound[f"{prefix}wx"]), ad.matmul(h, bound[f"{prefix}wh"])),
            bound[f"{prefix}bh"],
        )
    )
    return new_h, new_h


def rnn_cell_forward_np(
    store: ParamStore, x: np.ndarray, h: np.ndarray, prefix: str = ""
) -> tuple[np.ndarray, np.ndarray]:
    params = store.params
    _check_width(x.shape, params[f"{prefix}wx"].shape[0], f"{prefix}wx")
    _check_width(h.shape, params[f"{prefix}wh"].shape[0], f"{prefix}wh")
    new_h = np.tanh(x @ params[f"{prefix}wx"] + h @ params[f"{prefix}wh"] + params[f"{prefix}bh"])
    return new_h, new_h


# ----------------------------------------------------------------- policy heads


@dataclass(frozen=True)
class GaussianHead:
    """Diagonal Gaussian with a state-independent learnable log-std vector."""

    dim: int


@dataclass(frozen=True)
class CategoricalHead:
    n: int


PolicyHead = GaussianHead | CategoricalHead


def head_for(action_dim: int | None, n_actions: int | None) -> PolicyHead:
    if action_dim is not None:
        return GaussianHead(action_dim)
    if n_actions is not None:
        return CategoricalHead(n_actions)
    raise ValueError("action space needs either a continuous dim or a discrete cardinality")


def clamped_std(log_std: np.ndarray) -> np.ndarray:
    # -inf log-std denotes the degenerate (deterministic) distribution.
    std = np.exp(np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX))
    return np.where(np.isneginf(log_std), 0.0, std)


def policy_log_prob(head: PolicyHead, dist_params, actions: np.ndarray) -> Var:
    """Differentiable log-density / log-mass of recorded actions.

    Gaussian `dist_params` is a (mean, log_std) pair of graph nodes;
    Categorical `dist_params` is a logits node.
    """
    if isinstance(head, GaussianHead):
        mean, log_std = dist_params
        if actions.shape[-1] != head.dim:
            raise ShapeError("policy_log_prob", actions.shape, (head.dim,))
        log_std = ad.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = ad.exp(log_std)
        z = ad.div(ad.sub(ad.constant(actions), mean), std)
        quad = ad.vsum(ad.square(z), axis=-1)
        return ad.sub(
            ad.mul(ad.add(quad, head.dim * LOG2PI), -0.5),
            ad.vsum(log_std, axis=-1),
        )
    logits = dist_params
    idx = np.asarray(actions, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= head.n):
        raise IndexError(f"policy_log_prob: action index out of range [0, {head.n})")
    return ad.gather_rows(ad.log_softmax(logits, axis=-1), idx)


def policy_log_prob_np(head: PolicyHead, dist_params, actions: np.ndarray) -> np.ndarray:
    if isinstance(head, GaussianHead):
        mean, log_std = dist_params
        log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        z = (actions - mean) / std
        return -0.5 * ((z * z).sum(axis=-1) + head.dim * LOG2PI) - log_std.sum(axis=-1)
    logits = dist_params
    logp = logits - logits.max(axis=-1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=-1, keepdims=True))
    idx = np.asarray(actions, dtype=np.intp)
    if logp.ndim == 1:
        return logp[idx]
    return logp[np.arange(logp.shape[0]), idx]


def policy_sample(head: PolicyHead, dist_params, rng: np.random.Generator) -> np.ndarray:
    """One action; Gaussian by mean + std * noise, Categorical by inverse CDF."""
    if isinstance(head, GaussianHead):
        mean, log_std = dist_params
        std = clamped_std(log_std)
        return mean + std * rng.standard_normal(np.shape(mean))
    logits = np.asarray(dist_params, dtype=np.float64)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), u, side="right"), head.n - 1))


def policy_mode(head: PolicyHead, dist_params):
    """Deterministic action: Gaussian mean / Categorical argmax."""
    if isinstance(head, GaussianHead):
        mean, _ = dist_params
        return mean
    return int(np.argmax(dist_params))


def policy_kl(head: PolicyHead, old_params, new_params) -> float:
    """Mean closed-form KL(new || old) over the batch of states."""
    if isinstance(head, GaussianHead):
        mu_o, ls_o = old_params
        mu_n, ls_n = new_params
        ls_o = np.clip(ls_o, LOG_STD_MIN, LOG_STD_MAX)
        ls_n = np.clip(ls_n, LOG_STD_MIN, LOG_STD_MAX)
        var_o = np.exp(2.0 * ls_o)
        var_n = np.exp(2.0 * ls_n)
        per_dim = ls_o - ls_n + (var_n + (mu_n - mu_o) ** 2) / (2.0 * var_o) - 0.5
        if not np.all(np.isfinite(per_dim)):
            raise ValueError("policy_kl: non-finite distribution parameters")
        return float(per_dim.sum(axis=-1).mean())
    logit_o = np.asarray(old_params, dtype=np.float64)
    logit_n = np.asarray(new_params, dtype=np.float64)
    if not (np.all(np.isfinite(logit_o)) and np.all(np.isfinite(logit_n))):
        raise ValueError("policy_kl: non-finite distribution parameters")

    def _log_softmax(x):
        s = x - x.max(axis=-1, keepdims=True)
        return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))

    lp_n = _log_softmax(logit_n)
    lp_o = _log_softmax(logit_o)
    kl = (np.exp(lp_n) * (lp_n - lp_o)).sum(axis=-1)
    return float(np.mean(kl))


# ----------------------------------------------------------------- checkpoints

CHECKPOINT_MAGIC = b"P3OCKPT\x00"
CHECKPOINT_VERSION = 1


def save_params(path, named_arrays: Mapping[str, np.ndarray]) -> None:
    """Write a flat parameter container.

    Layout (all integers little-endian):
      magic ``P3OCKPT\\x00`` | u32 version | u32 record count, then per
      record: u16 name length | name utf-8 | u8 ndim | u32 extent per dim |
      float64 little-endian data, row-major.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(named_arrays)))
        for name in sorted(named_arrays):
            arr = np.asarray(named_arrays[name], dtype=np.float64)
            if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
                arr = np.ascontiguousarray(arr)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for extent in arr.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(arr.astype("<f8").tobytes())


def load_params(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint")
        version, count = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
    return out
