"""The residual 3-D CNN used as a learned proximal operator, with hand-written
reverse-mode derivatives.

Real feature maps are laid out ``(channels, nx, ny, nt)``. Complex images
enter as two channels (real, imaginary) each.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError, ParameterError
from .tensor import as_complex

__all__ = [
    "LEAKY_SLOPE",
    "Conv3dLayer",
    "CnnBlockParams",
    "CnnTape",
    "conv3d_forward",
    "conv3d_backward",
    "leaky_relu",
    "leaky_relu_backward",
    "cnn_proximal_forward",
    "cnn_proximal_backward",
    "init_params",
    "zero_params",
]

LEAKY_SLOPE = 0.01
KERNEL = 3


@dataclass
class Conv3dLayer:
    weights: np.ndarray  # (out_ch, in_ch, 3, 3, 3)
    bias: np.ndarray  # (out_ch,)
    activation: str = "leaky_relu"

    def __post_init__(self):
        if self.weights.ndim != 5 or self.weights.shape[2:] != (KERNEL,) * 3:
            raise DimensionError(f"conv weights must be (out, in, 3, 3, 3), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError("bias length must equal the number of output channels")
        if self.activation not in ("leaky_relu", "none"):
            raise ParameterError(f"unknown activation {self.activation!r}")

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


@dataclass
class CnnBlockParams:
    layers: list  # three Conv3dLayer
    alpha: float = LEAKY_SLOPE

    @property
    def plan(self) -> tuple:
        return (self.layers[0].in_channels,) + tuple(l.out_channels for l in self.layers)

    def arrays(self) -> list:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out

    def copy(self) -> "CnnBlockParams":
        return CnnBlockParams(
            [Conv3dLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers],
            self.alpha,
        )

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


def _im2col(x: np.ndarray) -> np.ndarray:
    """``(C, nx, ny, nt)`` -> ``(C*27, nx*ny*nt)`` patch matrix with zero padding."""
    c = x.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KERNEL,) * 3, axis=(1, 2, 3))  # C, nx, ny, nt, 3, 3, 3
    return np.ascontiguousarray(win.transpose(0, 4, 5, 6, 1, 2, 3)).reshape(c * 27, -1)


def _col2im(cols: np.ndarray, shape) -> np.ndarray:
    """Adjoint of :func:`_im2col`."""
    c, nx, ny, nt = shape
    cols = cols.reshape(c, KERNEL, KERNEL, KERNEL, nx, ny, nt)
    out = np.zeros((c, nx + 2, ny + 2, nt + 2))
    for a in range(KERNEL):
        for b in range(KERNEL):
            for d in range(KERNEL):
                out[:, a : a + nx, b : b + ny, d : d + nt] += cols[:, a, b, d]
    return out[:, 1:-1, 1:-1, 1:-1]


def leaky_relu(x, alpha=LEAKY_SLOPE):
    return np.where(x > 0, x, alpha * x)


def leaky_relu_backward(x, upstream, alpha=LEAKY_SLOPE):
    """Derivative is 1 for ``x > 0`` and ``alpha`` otherwise (including 0)."""
    return np.where(x > 0, upstream, alpha * upstream)


def _conv_linear(x, layer):
    if x.ndim != 4:
        raise DimensionError(f"feature maps must be (C, nx, ny, nt), got {x.shape}")
    if x.shape[0] != layer.in_channels:
        raise DimensionError(f"layer expects {layer.in_channels} channels, got {x.shape[0]}")
    w2 = layer.weights.reshape(layer.out_channels, -1)
    out = w2 @ _im2col(x) + layer.bias[:, None]
    return out.reshape((layer.out_channels,) + x.shape[1:])


def conv3d_forward(x, layer: Conv3dLayer, alpha=LEAKY_SLOPE):
    """Same-size 3x3x3 cross-correlation with zero padding, bias and optional
    LeakyReLU."""
    x = np.asarray(x, dtype=np.float64)
    pre = _conv_linear(x, layer)
    return leaky_relu(pre, alpha) if layer.activation == "leaky_relu" else pre


def conv3d_backward(x, pre, layer: Conv3dLayer, upstream, alpha=LEAKY_SLOPE):
    """Returns ``(grad_x, grad_weights, grad_bias)`` for one layer.

    ``pre`` is the pre-activation output saved by the forward pass.
    """
    if layer.activation == "leaky_relu":
        upstream = leaky_relu_backward(pre, upstream, alpha)
    g2 = upstream.reshape(layer.out_channels, -1)
    cols = _im2col(x)
    grad_w = (g2 @ cols.T).reshape(layer.weights.shape)
    grad_b = g2.sum(axis=1)
    grad_cols = layer.weights.reshape(layer.out_channels, -1).T @ g2
    grad_x = _col2im(grad_cols, x.shape)
    return grad_x, grad_w, grad_b


@dataclass(frozen=True)
class CnnTape:
    inputs: tuple  # input feature map of every layer
    pre: tuple  # pre-activation output of every layer
    params: CnnBlockParams


def _to_channels(x_k, l_next):
    return np.stack([x_k.real, x_k.imag, l_next.real, l_next.imag])


def cnn_proximal_forward(x_k, l_next, params: CnnBlockParams):
    """Sparse-layer update ``S = (X - L) + CNN([Re X, Im X, Re L, Im L])``.

    Returns ``(s_next, tape)``.
    """
    x_k = as_complex(x_k)
    l_next = as_complex(l_next)
    if x_k.shape != l_next.shape or x_k.ndim != 3:
        raise DimensionError(f"inputs must share a 3-D shape, got {x_k.shape} and {l_next.shape}")
    h = _to_channels(x_k, l_next)
    inputs, pres = [], []
    for layer in params.layers:
        inputs.append(h)
        pre = _conv_linear(h, layer)
        pres.append(pre)
        h = leaky_relu(pre, params.alpha) if layer.activation == "leaky_relu" else pre
    residual = h[0] + 1j * h[1]
    return (x_k - l_next) + residual, CnnTape(tuple(inputs), tuple(pres), params)


def cnn_proximal_backward(tape: CnnTape, upstream):
    """Gradients of ``Re <upstream, s_next>``.

    Returns ``(grad_x_k, grad_l_next, grad_params)`` with ``grad_params`` a
    :class:`CnnBlockParams` holding the weight and bias gradients.
    """
    G = as_complex(upstream)
    params = tape.params
    g = np.stack([G.real, G.imag])
    grads = [None] * len(params.layers)
    for i in reversed(range(len(params.layers))):
        layer = params.layers[i]
        g, gw, gb = conv3d_backward(tape.inputs[i], tape.pre[i], layer, g, params.alpha)
        grads[i] = Conv3dLayer(gw, gb, layer.activation)
    grad_x = G + (g[0] + 1j * g[1])
    grad_l = -G + (g[2] + 1j * g[3])
    return grad_x, grad_l, CnnBlockParams(grads, params.alpha)


def _plan_layers(plan):
    if len(plan) != 4 or plan[0] != 4 or plan[-1] != 2:
        raise ParameterError(f"channel plan must look like (4, c, c, 2), got {plan}")
    acts = ("leaky_relu", "leaky_relu", "none")
    return [(plan[i], plan[i + 1], acts[i]) for i in range(3)]


def init_params(plan=(4, 32, 32, 2), seed=0, alpha=LEAKY_SLOPE) -> CnnBlockParams:
    """He-normal weights (``std = sqrt(2 / (in_ch * 27))``) and zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for cin, cout, act in _plan_layers(tuple(plan)):
        std = np.sqrt(2.0 / (cin * 27))
        w = rng.normal(0.0, std, size=(cout, cin, KERNEL, KERNEL, KERNEL))
        layers.append(Conv3dLayer(w, np.zeros(cout), act))
    return CnnBlockParams(layers, alpha)


def zero_params(plan=(4, 32, 32, 2), alpha=LEAKY_SLOPE) -> CnnBlockParams:
    layers = [
        Conv3dLayer(np.zeros((cout, cin, KERNEL, KERNEL, KERNEL)), np.zeros(cout), act)
        for cin, cout, act in _plan_layers(tuple(plan))
    ]
    return CnnBlockParams(layers, alpha)
