"""Small float64 dense-network substrate: forward/backward, Adam, dropout,
losses and a finite-difference gradient checker."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dataset import DomainError

ACTIVATIONS = ("relu", "sigmoid", "linear", "softmax_grouped")
SNAPSHOT_VERSION = 1

RngLike = Union[np.random.Generator, int, None]


def as_rng(seed: RngLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "linear"
    dropout: float = 0.0
    # (start, stop) column blocks for softmax_grouped; width-1 blocks use a sigmoid,
    # columns outside every block stay linear
    groups: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError("dropout rate must lie in [0, 1)")
        self.groups = tuple((int(a), int(b)) for a, b in self.groups)

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[1]


def _activate(layer: Layer, z: np.ndarray) -> np.ndarray:
    act = layer.activation
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "sigmoid":
        return sigmoid(z)
    if act == "linear":
        return z.copy()
    out = z.copy()
    for a, b in layer.groups:
        if b - a == 1:
            out[:, a] = sigmoid(z[:, a])
        else:
            block = z[:, a:b] - z[:, a:b].max(axis=1, keepdims=True)
            e = np.exp(block)
            out[:, a:b] = e / e.sum(axis=1, keepdims=True)
    return out


def _activation_backward(layer: Layer, a: np.ndarray, z: np.ndarray, g: np.ndarray) -> np.ndarray:
    act = layer.activation
    if act == "relu":
        return g * (z > 0)
    if act == "sigmoid":
        return g * a * (1.0 - a)
    if act == "linear":
        return g
    out = g.copy()
    for s, t in layer.groups:
        if t - s == 1:
            out[:, s] = g[:, s] * a[:, s] * (1.0 - a[:, s])
        else:
            p = a[:, s:t]
            gp = g[:, s:t]
            out[:, s:t] = p * (gp - (gp * p).sum(axis=1, keepdims=True))
    return out


class DenseNet:
    """Feed-forward stack of dense layers.

    ``version`` increases whenever parameters change, so caches from an older
    forward pass are rejected by ``backward``.
    """

    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise DomainError(
                    f"layer dimensions do not chain: {prev.fan_out} feeds {nxt.fan_in}"
                )
        for layer in self.layers:
            if layer.activation == "softmax_grouped":
                for a, b in layer.groups:
                    if not 0 <= a < b <= layer.fan_out:
                        raise DomainError(f"softmax group ({a}, {b}) outside layer width")
        self.version = 0

    @classmethod
    def build(
        cls,
        sizes: Sequence[int],
        activations: Sequence[str],
        seed: RngLike = None,
        dropout: Optional[Sequence[float]] = None,
        groups: Sequence[tuple[int, int]] = (),
    ) -> "DenseNet":
        """Glorot-uniform weights, zero biases. ``groups`` applies to any
        softmax_grouped layer."""
        if len(activations) != len(sizes) - 1:
            raise DomainError("need one activation per layer")
        rng = as_rng(seed)
        dropout = list(dropout) if dropout is not None else [0.0] * len(activations)
        layers = []
        for i, act in enumerate(activations):
            fi, fo = sizes[i], sizes[i + 1]
            limit = np.sqrt(6.0 / (fi + fo))
            w = rng.uniform(-limit, limit, size=(fi, fo))
            layers.append(
                Layer(w, np.zeros(fo), act, dropout[i], groups if act == "softmax_grouped" else ())
            )
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def touch(self) -> None:
        self.version += 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x, training=False)[0]

    def to_dict(self) -> dict:
        return {
            "format": "edusynth.densenet",
            "version": SNAPSHOT_VERSION,
            "layers": [
                {
                    "shape": list(layer.weight.shape),
                    "weight": layer.weight.ravel().tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation,
                    "dropout": layer.dropout,
                    "groups": [list(g) for g in layer.groups],
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNet":
        if d.get("format") != "edusynth.densenet" or d.get("version") != SNAPSHOT_VERSION:
            raise DomainError("unsupported network snapshot")
        return cls(
            [
                Layer(
                    np.array(l["weight"], dtype=np.float64).reshape(l["shape"]),
                    np.array(l["bias"], dtype=np.float64),
                    l["activation"],
                    l["dropout"],
                    tuple(tuple(g) for g in l["groups"]),
                )
                for l in d["layers"]
            ]
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Cache:
    net_id: int
    version: int
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    masks: list[Optional[np.ndarray]]


def forward(net: DenseNet, batch: np.ndarray, training: bool = False, seed: RngLike = None):
    """Returns ``(output, cache)``. Dropout (inverted, scaled by 1/(1-rate))
    only runs when ``training`` is true."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise DomainError(f"batch shape {x.shape} does not match input dim {net.input_dim}")
    rng = as_rng(seed) if training else None
    inputs, pre, post, masks = [], [], [], []
    for layer in net.layers:
        inputs.append(x)
        z = x @ layer.weight + layer.bias
        a = _activate(layer, z)
        mask = None
        if training and layer.dropout > 0.0:
            keep = 1.0 - layer.dropout
            mask = (rng.random(a.shape) < keep) / keep
            x = a * mask
        else:
            x = a
        pre.append(z)
        post.append(a)
        masks.append(mask)
    return x, Cache(id(net), net.version, inputs, pre, post, masks)


@dataclass
class Gradients:
    params: list[np.ndarray]
    input: np.ndarray


def backward(net: DenseNet, cache: Cache, output_gradient: np.ndarray) -> Gradients:
    """Reverse-mode gradients for the cached forward pass. ``params`` is laid
    out like ``net.params()``; ``input`` is the gradient w.r.t. the batch."""
    if cache.net_id != id(net) or cache.version != net.version:
        raise DomainError("stale cache: network changed since the forward pass")
    g = np.asarray(output_gradient, dtype=np.float64)
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        gz = _activation_backward(layer, cache.post[i], cache.pre[i], g)
        grads[2 * i] = cache.inputs[i].T @ gz
        grads[2 * i + 1] = gz.sum(axis=0)
        g = gz @ layer.weight.T
    return Gradients(grads, g)


# --------------------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DomainError("parameter/gradient/state counts differ")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DomainError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def optimize(net: DenseNet, state: AdamState, grads: Gradients) -> None:
    adam_step(state, net.params(), grads.params)
    net.touch()


# --------------------------------------------------------------------------- losses


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over every entry, as Keras' MSE."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def bce_loss(prob: np.ndarray, target: np.ndarray, eps: float = 1e-12) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on probabilities."""
    p = np.clip(prob, eps, 1.0 - eps)
    loss = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    grad = (p - target) / (p * (1.0 - p)) / p.size
    return float(loss), grad


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Seeded shuffle each call; the last short batch is kept."""
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s : s + batch_size]


# --------------------------------------------------------------------------- checks


def gradient_check(
    net: DenseNet,
    loss: Callable[[np.ndarray], tuple[float, np.ndarray]],
    batch: np.ndarray,
    n_checks: int = 1000,
    h: float = 1e-5,
    seed: int = 0,
    training: bool = False,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over up to ``n_checks`` randomly chosen parameters. With ``training`` the
    same dropout mask is reused for every evaluation."""

    def objective():
        out, cache = forward(net, batch, training=training, seed=seed)
        value, g_out = loss(out)
        return value, [backward(net, cache, g_out)]

    return objective_gradient_check([net], objective, n_checks, h, seed)


def objective_gradient_check(
    nets: Sequence[DenseNet],
    objective: Callable[[], tuple[float, Sequence[Gradients]]],
    n_checks: int = 1000,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error ``|a - n| / max(|a|, |n|, 1e-6)`` between analytic and
    central-difference gradients of a scalar objective over several nets.

    ``objective()`` must be deterministic (fixed noise and dropout masks) and
    return the loss with one :class:`Gradients` per net, in ``nets`` order.
    Where the forward and backward one-sided differences disagree, the step
    straddles a ReLU kink and is shrunk tenfold (down to 1e-9) before comparing.
    """
    f0, grads = objective()
    slots = []
    for net, g in zip(nets, grads):
        for p, a in zip(net.params(), g.params):
            slots.append((p, a.copy()))
    sizes = [p.size for p, _ in slots]
    offsets = np.cumsum([0] + sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(offsets[-1], size=min(n_checks, int(offsets[-1])), replace=False)
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        p, analytic = slots[k]
        idx = np.unravel_index(int(flat - offsets[k]), p.shape)
        orig = p[idx]
        step = h
        while True:
            p[idx] = orig + step
            lp = objective()[0]
            p[idx] = orig - step
            lm = objective()[0]
            p[idx] = orig
            fwd, bwd = (lp - f0) / step, (f0 - lm) / step
            smooth = abs(fwd - bwd) <= 1e-3 * max(abs(fwd), abs(bwd), 1e-6)
            if smooth or step <= 1e-9:
                break
            step /= 10.0
        numeric = (lp - lm) / (2.0 * step)
        a = analytic[idx]
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-6))
    for net in nets:
        net.touch()
    return worst
