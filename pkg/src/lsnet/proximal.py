"""Proximal operators: singular value thresholding (fixed and learned) and
complex soft thresholding in the temporal Fourier domain.

Gradients follow the real/imaginary convention used across the package: for
a real loss ``J`` of a complex array ``Z`` the gradient ``G`` satisfies
``dJ = Re sum(conj(G) * dZ)``, i.e. ``Re G = dJ/dRe Z`` and
``Im G = dJ/dIm Z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError
from .tensor import SvdFactors, as_complex, fft_time, ifft_time, svd

__all__ = [
    "sigmoid",
    "svt",
    "lsvt",
    "lsvt_backward",
    "LsvtTape",
    "soft_threshold_complex",
    "temporal_fourier_prox",
    "nuclear_norm",
]

GAP_EPS = 1e-9


def sigmoid(b: float) -> float:
    if b >= 0:
        return 1.0 / (1.0 + np.exp(-b))
    e = np.exp(b)
    return e / (1.0 + e)


def nuclear_norm(m) -> float:
    return float(np.sum(np.linalg.svd(as_complex(m), compute_uv=False)))


def svt(m, tau: float) -> np.ndarray:
    """``U diag(max(sigma - tau, 0)) V*``, the prox of ``tau * ||.||_*``."""
    if not np.isfinite(tau) or tau < 0:
        raise ParameterError(f"threshold must be finite and >= 0, got {tau}")
    f = svd(m)
    shrunk = np.maximum(f.sigma - tau, 0.0)
    keep = shrunk > 0
    return (f.U[:, keep] * shrunk[keep]) @ f.V[:, keep].conj().T


@dataclass(frozen=True)
class LsvtTape:
    factors: SvdFactors
    beta: float
    s: float  # sigmoid(beta)
    tau: float
    degenerate: bool  # a near-tied pair of singular values touched the active set


def lsvt(m, beta: float):
    """Learned SVT with threshold ``sigmoid(beta) * sigma_1``.

    Returns the thresholded matrix and a tape for :func:`lsvt_backward`.
    """
    m = as_complex(m)
    f = svd(m)
    s = sigmoid(float(beta))
    sigma = f.sigma
    sigma1 = float(sigma[0]) if sigma.size else 0.0
    tau = s * sigma1
    g = np.maximum(sigma - tau, 0.0)
    out = (f.U * g) @ f.V.conj().T

    active = sigma > tau
    gaps = np.abs(sigma[:, None] - sigma[None, :])
    involved = active[:, None] | active[None, :]
    np.fill_diagonal(involved, False)
    degenerate = bool(sigma1 > 0 and np.any(gaps[involved] < GAP_EPS * sigma1))
    return out, LsvtTape(f, float(beta), s, tau, degenerate)


def _spectral_backward(U, sigma, V, g, dg_dsigma, G, sigma1):
    """Reverse-mode rule for ``Y = U diag(g(sigma)) V*`` with ``m >= n``.

    ``dg_dsigma[i, j]`` is the partial of ``g_i`` w.r.t. ``sigma_j``.
    """
    r = sigma.size
    Gt = U.conj().T @ G @ V
    s2 = sigma**2
    eps = GAP_EPS * (sigma1**2)
    denom = s2[None, :] - s2[:, None]  # sigma_j^2 - sigma_i^2
    inv = denom / (denom**2 + eps**2)
    np.fill_diagonal(inv, 0.0)
    sg = sigma * g
    A = (sg[None, :] - sg[:, None]) * inv
    B = (sigma[:, None] * g[None, :] - sigma[None, :] * g[:, None]) * inv

    K = A * Gt + B * Gt.conj().T
    safe = sigma > 0
    ratio = np.zeros(r)
    ratio[safe] = g[safe] / sigma[safe]
    diag = np.diag(Gt)
    K[np.diag_indices(r)] = dg_dsigma.T @ diag.real + 1j * diag.imag * ratio

    grad = U @ K @ V.conj().T
    # component of G outside the column space of U
    GV = G @ V
    comp = GV - U @ (U.conj().T @ GV)
    grad += (comp * ratio) @ V.conj().T
    return grad


def lsvt_backward(tape: LsvtTape, upstream):
    """Gradients of ``Re <upstream, lsvt(M, beta)>`` w.r.t. ``M`` and ``beta``.

    The beta gradient is ``Re <upstream, U S V*>`` where ``S`` is diagonal
    with ``-sigmoid'(beta) * sigma_1`` on singular values above the threshold
    and zero elsewhere. The input gradient uses the differentiable-SVD chain
    rule, including the dependence of the threshold on ``sigma_1``.
    """
    G = as_complex(upstream)
    U, sigma, V = tape.factors
    if G.shape != (U.shape[0], V.shape[0]):
        raise ParameterError(f"upstream shape {G.shape} does not match tape")
    r = sigma.size
    if r == 0 or sigma[0] == 0.0:
        return np.zeros_like(G), 0.0
    sigma1 = float(sigma[0])
    s = tape.s
    ds = s * (1.0 - s)
    active = sigma > tape.tau
    g = np.where(active, sigma - tape.tau, 0.0)

    diag = np.einsum("ij,ij->j", U.conj(), G @ V)  # diag(U* G V)
    beta_grad = float(np.sum(diag.real[active]) * (-ds * sigma1))

    dg = np.diag(active.astype(float))
    dg[:, 0] -= s * active
    if U.shape[0] >= V.shape[0]:
        grad = _spectral_backward(U, sigma, V, g, dg, G, sigma1)
    else:
        grad = _spectral_backward(V, sigma, U, g, dg, G.conj().T, sigma1).conj().T
    return grad, beta_grad


def soft_threshold_complex(x, tau: float) -> np.ndarray:
    """Entrywise complex shrinkage ``v * max(|v| - tau, 0) / |v|``."""
    if tau < 0:
        raise ParameterError(f"threshold must be >= 0, got {tau}")
    x = as_complex(x)
    mag = np.abs(x)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = np.maximum(mag[nz] - tau, 0.0) / mag[nz]
    return x * scale


def temporal_fourier_prox(s, tau: float) -> np.ndarray:
    """Prox of ``tau * ||F_t s||_1`` for the orthonormal temporal DFT ``F_t``."""
    return ifft_time(soft_threshold_complex(fft_time(s), tau))
