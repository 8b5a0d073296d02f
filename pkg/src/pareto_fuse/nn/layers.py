"""Dense layers and single-head self-attention built on the autodiff core."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .autograd import Tensor
from .params import ParameterStore, glorot_uniform

ACTIVATIONS = ("none", "relu", "sigmoid")


def dense_forward(x, weights, bias, activation: str = "none") -> Tensor:
    """activation(x @ W + b) with batched or single-vector input."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    weights = weights if isinstance(weights, Tensor) else Tensor(weights)
    bias = bias if isinstance(bias, Tensor) else Tensor(bias)
    if activation not in ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")
    in_dim = weights.shape[0]
    if x.shape[-1] != in_dim:
        raise ConfigurationError(
            f"input dim {x.shape} incompatible with weight shape {weights.shape}")
    out = x @ weights + bias
    if activation == "relu":
        return out.relu()
    if activation == "sigmoid":
        return out.sigmoid()
    return out


class Dense:
    """A dense layer whose parameters live in a ParameterStore."""

    def __init__(self, store: ParameterStore, name: str, in_dim: int,
                 out_dim: int, activation: str, rng: np.random.Generator):
        self.activation = activation
        self.w = store.add(f"{name}.w",
                           glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)))
        self.b = store.add(f"{name}.b", np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        return dense_forward(x, self.w, self.b, self.activation)


class MLP:
    """Stack of ReLU dense layers with a configurable final activation."""

    def __init__(self, store: ParameterStore, name: str, in_dim: int,
                 dims: list[int], rng: np.random.Generator,
                 final_activation: str = "relu"):
        self.layers = []
        prev = in_dim
        for i, dim in enumerate(dims):
            act = final_activation if i == len(dims) - 1 else "relu"
            self.layers.append(Dense(store, f"{name}.{i}", prev, dim, act, rng))
            prev = dim
        self.out_dim = prev

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def self_attention_forward(tokens, params: dict, return_weights: bool = False):
    """Single-head scaled dot-product attention with a residual connection.

    tokens: (T, d) or (B, T, d).  params holds square projections wq/wk/wv.
    """
    x = tokens if isinstance(tokens, Tensor) else Tensor(tokens)
    d = x.shape[-1]
    for key in ("wq", "wk", "wv"):
        w = params[key]
        wshape = w.shape if isinstance(w, Tensor) else np.shape(w)
        if wshape != (d, d):
            raise ConfigurationError(
                f"attention projection {key} has shape {wshape}, expected {(d, d)}")
    q = x @ params["wq"]
    k = x @ params["wk"]
    v = x @ params["wv"]
    kt_axes = list(range(k.data.ndim))
    kt_axes[-1], kt_axes[-2] = kt_axes[-2], kt_axes[-1]
    kt = Tensor(np.transpose(k.data, kt_axes), _prev=(k,))
    def backward(g):
        if k.requires_grad:
            k._accumulate(np.transpose(g, kt_axes))
    kt._backward = backward
    scores = (q @ kt) * (1.0 / np.sqrt(d))
    attn = scores.softmax(axis=-1)
    out = x + attn @ v
    if return_weights:
        return out, attn
    return out


class SelfAttention:
    def __init__(self, store: ParameterStore, name: str, d: int,
                 rng: np.random.Generator):
        self.params = {
            key: store.add(f"{name}.{key}", glorot_uniform(rng, d, d, (d, d)))
            for key in ("wq", "wk", "wv")
        }

    def __call__(self, tokens, return_weights: bool = False):
        return self_attention_forward(tokens, self.params, return_weights)
