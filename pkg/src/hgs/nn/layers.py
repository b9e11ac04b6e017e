"""MLP and LSTM building blocks.

Forward functions work on plain arrays or on ``ad.Var`` values, so the same
code serves prediction and gradient computation. Weight matrices are stored
as (fan_in, fan_out) and applied as ``x @ W + b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    out_dim: int
    hidden_layers: int = 2
    hidden_units: int = 16
    activation: str = "relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 0 or self.out_dim < 1 or self.hidden_units < 1 or self.hidden_layers < 0:
            raise ValueError(f"invalid MLP dimensions {self}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")

    @property
    def layer_dims(self) -> list[int]:
        return [self.in_dim] + [self.hidden_units] * self.hidden_layers + [self.out_dim]

    def n_params(self) -> int:
        d = self.layer_dims
        return sum(d[i] * d[i + 1] + d[i + 1] for i in range(len(d) - 1))


@dataclass(frozen=True)
class EncoderSpec:
    input_dim: int
    hidden_dim: int
    layers: int = 2

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1 or self.layers < 1:
            raise ValueError(f"invalid encoder dimensions {self}")


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> list[tuple[str, np.ndarray]]:
    """Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    out = []
    d = spec.layer_dims
    for k in range(len(d) - 1):
        bound = 1.0 / np.sqrt(max(d[k], 1))  # a parentless node's first layer is only its bias
        out.append((f"W{k}", _uniform(rng, bound, (d[k], d[k + 1]))))
        out.append((f"b{k}", _uniform(rng, bound, (d[k + 1],))))
    return out


def mlp_forward(spec: MlpSpec, params: dict, x, training: bool = False, rng: np.random.Generator | None = None):
    """Affine-ReLU stack with a final affine layer.

    ``x`` is (in_dim,) or (batch, in_dim). Dropout is inverted dropout applied
    after each hidden activation, only when ``training`` is set.
    """
    xv = ad.value(x)
    if xv.shape[-1] != spec.in_dim:
        raise ValueError(f"MLP expects {spec.in_dim} inputs, got {xv.shape[-1]}")
    if training and spec.dropout_rate > 0 and rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    h = x
    n = len(spec.layer_dims) - 1
    for k in range(n):
        h = ad.add(ad.matmul(h, params[f"W{k}"]), params[f"b{k}"])
        if k < n - 1:
            h = ad.relu(h)
            if training and spec.dropout_rate > 0:
                keep = rng.random(ad.value(h).shape) >= spec.dropout_rate
                h = ad.mul(h, keep / (1.0 - spec.dropout_rate))
    return h


def init_lstm(spec: EncoderSpec, rng: np.random.Generator) -> list[tuple[str, np.ndarray]]:
    """Weights U(-1/sqrt(hidden), 1/sqrt(hidden)); biases zero."""
    out = []
    H = spec.hidden_dim
    bound = 1.0 / np.sqrt(H)
    for layer in range(spec.layers):
        fan_in = spec.input_dim if layer == 0 else H
        out.append((f"Wx{layer}", _uniform(rng, bound, (fan_in, 4 * H))))
        out.append((f"Wh{layer}", _uniform(rng, bound, (H, 4 * H))))
        out.append((f"b{layer}", np.zeros(4 * H)))
    return out


def lstm_cell(x, h, c, Wx, Wh, b, H: int):
    """One LSTM step, gate order (input, forget, cell, output)."""
    z = ad.add(ad.add(ad.matmul(x, Wx), ad.matmul(h, Wh)), b)
    i = ad.sigmoid(ad.getitem(z, (Ellipsis, slice(0, H))))
    f = ad.sigmoid(ad.getitem(z, (Ellipsis, slice(H, 2 * H))))
    g = ad.tanh(ad.getitem(z, (Ellipsis, slice(2 * H, 3 * H))))
    o = ad.sigmoid(ad.getitem(z, (Ellipsis, slice(3 * H, 4 * H))))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def encode(spec: EncoderSpec, params: dict, seq):
    """Run a stacked LSTM over ``seq`` and return the final top-layer hidden state.

    ``seq`` is (T, input_dim) or (batch, T, input_dim); zero initial state.
    """
    sv = ad.value(seq)
    if sv.ndim not in (2, 3) or sv.shape[-1] != spec.input_dim:
        raise ValueError(f"encoder expects (..., T, {spec.input_dim}) input, got {sv.shape}")
    T = sv.shape[-2]
    if T < 1:
        raise ValueError("encoder needs at least one time step")
    H = spec.hidden_dim
    batch_shape = sv.shape[:-2]
    steps = [ad.getitem(seq, (Ellipsis, t, slice(None))) for t in range(T)]
    for layer in range(spec.layers):
        h = np.zeros(batch_shape + (H,))
        c = np.zeros(batch_shape + (H,))
        outs = []
        for x in steps:
            h, c = lstm_cell(x, h, c, params[f"Wx{layer}"], params[f"Wh{layer}"], params[f"b{layer}"], H)
            outs.append(h)
        steps = outs
    return steps[-1]
