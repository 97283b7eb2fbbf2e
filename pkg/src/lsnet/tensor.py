"""Complex tensor primitives: Casorati reshaping, orthonormal FFTs and a
deterministic thin SVD.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128``. Dynamic
images are laid out as ``(nx, ny, nt)`` with time on the last axis.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import DimensionError, NumericError

__all__ = [
    "SvdFactors",
    "as_complex",
    "casorati",
    "uncasorati",
    "svd",
    "fft2_frames",
    "ifft2_frames",
    "fft_time",
    "ifft_time",
    "inner",
    "norm2",
]


class SvdFactors(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.conj().T


def as_complex(x) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128)


def _require_ndim(x: np.ndarray, ndim: int, name: str = "x") -> None:
    if x.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} dims, got shape {x.shape}")


def casorati(x) -> np.ndarray:
    """Reshape ``(nx, ny, nt)`` into the ``(nx*ny, nt)`` space-by-time matrix.

    Column ``t`` is frame ``t`` flattened in row-major order.
    """
    x = as_complex(x)
    _require_ndim(x, 3)
    nx, ny, nt = x.shape
    return x.reshape(nx * ny, nt)


def uncasorati(m, shape) -> np.ndarray:
    m = as_complex(m)
    _require_ndim(m, 2, "m")
    nx, ny, nt = shape
    if m.shape != (nx * ny, nt):
        raise DimensionError(f"cannot fold matrix {m.shape} into {tuple(shape)}")
    return m.reshape(nx, ny, nt)


def _fix_phase(U: np.ndarray, V: np.ndarray) -> None:
    # make the first non-negligible entry of each left vector real positive
    r = U.shape[1]
    if r == 0:
        return
    mag = np.abs(U)
    thresh = 1e-12 * mag.max(axis=0, initial=0.0)
    first = np.argmax(mag > thresh[None, :], axis=0)
    pivot = U[first, np.arange(r)]
    phase = np.ones(r, dtype=np.complex128)
    nz = np.abs(pivot) > 0
    phase[nz] = np.abs(pivot[nz]) / pivot[nz]
    U *= phase[None, :]
    V *= phase[None, :]


def svd(m) -> SvdFactors:
    """Thin SVD ``M = U diag(sigma) V*`` with a fixed phase convention.

    The first nonzero entry of every column of ``U`` is real and positive;
    the matching column of ``V`` is rotated by the same phase so the product
    is unchanged.
    """
    m = as_complex(m)
    _require_ndim(m, 2, "m")
    if not np.all(np.isfinite(m)):
        raise NumericError("svd input contains non-finite entries")
    try:
        U, s, Vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge for matrix of shape {m.shape}") from exc
    V = Vh.conj().T.copy()
    U = np.ascontiguousarray(U)
    _fix_phase(U, V)
    factors = SvdFactors(U, s, V)
    scale = max(float(np.linalg.norm(m)), 1e-300)
    resid = float(np.linalg.norm(factors.reconstruct() - m)) / scale
    if not np.isfinite(resid) or resid > 1e-8:
        raise NumericError(f"SVD reconstruction residual {resid:.3e} too large")
    return factors


def fft2_frames(x) -> np.ndarray:
    """Orthonormal 2-D DFT of every frame (axes 0 and 1 of the last three)."""
    x = as_complex(x)
    if x.ndim < 3:
        raise DimensionError(f"expected at least 3 dims, got shape {x.shape}")
    return np.fft.fft2(x, axes=(-3, -2), norm="ortho")


def ifft2_frames(x) -> np.ndarray:
    x = as_complex(x)
    if x.ndim < 3:
        raise DimensionError(f"expected at least 3 dims, got shape {x.shape}")
    return np.fft.ifft2(x, axes=(-3, -2), norm="ortho")


def fft_time(x) -> np.ndarray:
    """Orthonormal DFT along the temporal (last) axis."""
    x = as_complex(x)
    _require_ndim(x, 3)
    return np.fft.fft(x, axis=-1, norm="ortho")


def ifft_time(x) -> np.ndarray:
    x = as_complex(x)
    _require_ndim(x, 3)
    return np.fft.ifft(x, axis=-1, norm="ortho")


def inner(x, y) -> complex:
    """``sum(x * conj(y))``, linear in the first argument."""
    x = as_complex(x)
    y = as_complex(y)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    return complex(np.vdot(y, x))


def norm2(x) -> float:
    return float(np.linalg.norm(as_complex(x).ravel()))
