"""Unrolled low-rank + sparse network: forward reconstruction and reverse-mode
gradients of all block parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodingOperator
from .exceptions import DimensionError, NumericError, ParameterError
from .neural import (
    LEAKY_SLOPE,
    CnnBlockParams,
    CnnTape,
    cnn_proximal_backward,
    cnn_proximal_forward,
    init_params,
    zero_params,
)
from .proximal import LsvtTape, lsvt, lsvt_backward
from .tensor import as_complex, casorati, uncasorati

__all__ = [
    "LsNetParams",
    "BlockRecord",
    "ForwardTape",
    "lsnet_forward",
    "lsnet_backward",
    "loss_mse",
]


@dataclass
class LsNetParams:
    """Per-block threshold factors, step sizes and CNN weights."""

    betas: np.ndarray
    gammas: np.ndarray
    cnns: list = field(default_factory=list)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        self.gammas = np.asarray(self.gammas, dtype=np.float64)
        if self.betas.ndim != 1 or self.betas.size < 1:
            raise ParameterError("need at least one block")
        if self.gammas.shape != self.betas.shape or len(self.cnns) != self.betas.size:
            raise ParameterError("betas, gammas and cnns must have one entry per block")

    @classmethod
    def initial(cls, n_iter=10, plan=(4, 32, 32, 2), seed=0, beta=-2.0, gamma=1.0,
                alpha=LEAKY_SLOPE, zero_last_layer=False) -> "LsNetParams":
        """He-initialized blocks. With ``zero_last_layer`` the final conv
        layer of every block starts at zero, so the untrained CNN residual
        vanishes and training starts from the plain L+S iteration."""
        seeds = np.random.SeedSequence(seed).generate_state(n_iter)
        cnns = [init_params(plan, int(s), alpha) for s in seeds]
        if zero_last_layer:
            for cnn in cnns:
                cnn.layers[-1].weights[...] = 0.0
        return cls(np.full(n_iter, float(beta)), np.full(n_iter, float(gamma)), cnns)

    @classmethod
    def zeros_like_plan(cls, n_iter=1, plan=(4, 32, 32, 2), beta=-30.0, gamma=1.0,
                        alpha=LEAKY_SLOPE) -> "LsNetParams":
        cnns = [zero_params(plan, alpha) for _ in range(n_iter)]
        return cls(np.full(n_iter, float(beta)), np.full(n_iter, float(gamma)), cnns)

    @property
    def n_iter(self) -> int:
        return self.betas.size

    @property
    def plan(self) -> tuple:
        return self.cnns[0].plan

    @property
    def alpha(self) -> float:
        return self.cnns[0].alpha

    def arrays(self) -> list:
        """All parameter arrays in declaration order (views, not copies).

        Order: ``betas``, ``gammas``, then every block's conv weights and
        biases layer by layer.
        """
        out = [self.betas, self.gammas]
        for cnn in self.cnns:
            out.extend(cnn.arrays())
        return out

    def copy(self) -> "LsNetParams":
        return LsNetParams(self.betas.copy(), self.gammas.copy(), [c.copy() for c in self.cnns])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True)
class BlockRecord:
    X: np.ndarray  # X_k (block input)
    S: np.ndarray  # S_k
    L_next: np.ndarray
    S_next: np.ndarray
    grad_F: np.ndarray  # grad F(L_{k+1} + S_{k+1})
    X_next: np.ndarray
    lsvt: LsvtTape
    cnn: CnnTape


@dataclass(frozen=True)
class ForwardTape:
    blocks: tuple
    op: EncodingOperator
    params: LsNetParams


def _check_finite(arr, block, layer):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in block {block}, {layer} layer")


def lsnet_forward(y, op: EncodingOperator, params: LsNetParams):
    """Run all unrolled blocks from ``L_0 = X_0 = A*y`` and ``S_0 = 0``.

    Returns ``(X_N, L_N, S_N, tape)``.
    """
    y = as_complex(y)
    if y.shape != op.kspace_shape:
        raise DimensionError(f"k-space shape {y.shape} != operator {op.kspace_shape}")
    if not params.is_finite():
        raise NumericError("parameters contain non-finite values")
    X = op.adjoint(y)
    L = X.copy()
    S = np.zeros_like(X)
    shape = X.shape
    blocks = []
    for k in range(params.n_iter):
        low, lt = lsvt(casorati(X - S), params.betas[k])
        L_next = uncasorati(low, shape)
        _check_finite(L_next, k, "low-rank")
        S_next, ct = cnn_proximal_forward(X, L_next, params.cnns[k])
        _check_finite(S_next, k, "sparse")
        Z = L_next + S_next
        gF = op.adjoint(op.forward(Z) - y)
        X_next = Z - params.gammas[k] * gF
        _check_finite(X_next, k, "data-consistency")
        blocks.append(BlockRecord(X, S, L_next, S_next, gF, X_next, lt, ct))
        X, L, S = X_next, L_next, S_next
    return X, L, S, ForwardTape(tuple(blocks), op, params)


def lsnet_backward(tape: ForwardTape, grad_X_N) -> LsNetParams:
    """Gradient of a loss w.r.t. every block parameter given ``dLoss/dX_N``.

    The result is an :class:`LsNetParams` holding gradients in place of values.
    """
    op = tape.op
    params = tape.params
    n = params.n_iter
    gX = as_complex(grad_X_N).copy()
    gS = np.zeros_like(gX)  # gradient flowing into S_{k+1} from later blocks
    g_beta = np.zeros(n)
    g_gamma = np.zeros(n)
    g_cnn = [None] * n
    for k in reversed(range(n)):
        rec = tape.blocks[k]
        g_gamma[k] = -np.vdot(rec.grad_F, gX).real
        gZ = gX - params.gammas[k] * op.normal(gX)
        gL = gZ
        gSn = gZ + gS
        gx_cnn, gl_cnn, g_cnn[k] = cnn_proximal_backward(rec.cnn, gSn)
        gL = gL + gl_cnn
        gD, g_beta[k] = lsvt_backward(rec.lsvt, casorati(gL))
        gD = uncasorati(gD, gX.shape)
        gX = gx_cnn + gD
        gS = -gD
    return LsNetParams(g_beta, g_gamma, g_cnn)


def loss_mse(X_N, X_ref):
    """Summed squared error ``||X_N - X_ref||^2`` and its gradient ``2(X_N - X_ref)``."""
    X_N = as_complex(X_N)
    X_ref = as_complex(X_ref)
    if X_N.shape != X_ref.shape:
        raise DimensionError(f"shape mismatch {X_N.shape} vs {X_ref.shape}")
    d = X_N - X_ref
    return float(np.vdot(d, d).real), 2.0 * d
