"""Cartesian sampling masks, coil sensitivities and the encoding operator.

Single-coil k-space has the image shape ``(nx, ny, nt)``; multi-coil k-space
is ``(nc, nx, ny, nt)``. K-space arrays use natural FFT order (DC at index 0).
Mask patterns are stored in centered order (DC at row ``ny // 2``), select
phase-encode lines (``ky``) per frame and are broadcast along ``kx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, ParameterError
from .tensor import as_complex, fft2_frames, ifft2_frames

__all__ = [
    "SamplingMask",
    "EncodingOperator",
    "center_rows",
    "make_cartesian_mask",
    "make_sensitivities",
    "forward",
    "adjoint",
    "grad_data_fidelity",
]


@dataclass(frozen=True)
class SamplingMask:
    pattern: np.ndarray  # (ny, nt), 0/1 float
    target_af: float = 1.0
    n_center: int = 0
    seed: int = 0

    @property
    def realized_af(self) -> float:
        return self.pattern.size / float(self.pattern.sum())


def center_rows(ny: int, n_center: int) -> np.ndarray:
    """Indices of the ``n_center`` central phase-encode lines."""
    start = ny // 2 - (n_center + 1) // 2
    return np.arange(start, start + n_center)


def make_cartesian_mask(ny, nt, af, n_center=4, seed=0) -> SamplingMask:
    """Random per-frame Cartesian line selection with a fully sampled center.

    Every frame keeps exactly ``round(ny / af)`` lines: the central block plus
    lines drawn uniformly without replacement from the rest.
    """
    if ny < 1 or nt < 1:
        raise ParameterError("mask extents must be positive")
    if af < 1:
        raise ParameterError(f"acceleration factor must be >= 1, got {af}")
    if n_center > ny:
        raise ParameterError(f"n_center={n_center} exceeds ny={ny}")
    n_lines = int(round(ny / af))
    if n_lines < n_center:
        raise ParameterError(
            f"af={af} keeps {n_lines} lines per frame, fewer than n_center={n_center}"
        )
    if n_lines < 1:
        raise ParameterError(f"af={af} keeps no lines out of ny={ny}")

    rng = np.random.default_rng(seed)
    center = center_rows(ny, n_center)
    others = np.setdiff1d(np.arange(ny), center)
    pattern = np.zeros((ny, nt))
    pattern[center, :] = 1.0
    n_extra = n_lines - n_center
    for t in range(nt):
        picked = rng.choice(others, size=n_extra, replace=False)
        pattern[picked, t] = 1.0
    return SamplingMask(pattern, float(af), int(n_center), int(seed))


def make_sensitivities(nc, nx, ny, seed=0) -> np.ndarray:
    """Smooth synthetic coil maps normalized to unit root-sum-of-squares.

    Coil centers sit on an ellipse around the field of view; each map is a
    broad Gaussian magnitude times a random linear phase ramp.
    """
    if nc < 1:
        raise ParameterError("need at least one coil")
    rng = np.random.default_rng(seed)
    xs = (np.arange(nx) - (nx - 1) / 2) / nx
    ys = (np.arange(ny) - (ny - 1) / 2) / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    sens = np.empty((nc, nx, ny), dtype=np.complex128)
    offset = rng.uniform(0, 2 * np.pi)
    for c in range(nc):
        angle = offset + 2 * np.pi * c / nc
        cx, cy = 0.6 * np.cos(angle), 0.6 * np.sin(angle)
        width = 0.6
        mag = np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * width**2))
        kx, ky = rng.uniform(-1.0, 1.0, size=2)
        phase = np.pi * (kx * gx + ky * gy) + rng.uniform(0, 2 * np.pi)
        sens[c] = mag * np.exp(1j * phase)
    rss = np.sqrt(np.sum(np.abs(sens) ** 2, axis=0))
    return sens / rss[None]


@dataclass(frozen=True)
class EncodingOperator:
    mask: SamplingMask
    image_shape: tuple
    sens: np.ndarray | None = field(default=None)

    def __post_init__(self):
        nx, ny, nt = self.image_shape
        if self.mask.pattern.shape != (ny, nt):
            raise DimensionError(
                f"mask shape {self.mask.pattern.shape} does not match (ny, nt)=({ny}, {nt})"
            )
        if self.sens is not None:
            if self.sens.ndim != 3 or self.sens.shape[1:] != (nx, ny):
                raise DimensionError(
                    f"sensitivities of shape {self.sens.shape} do not match image ({nx}, {ny})"
                )
            rss = np.sum(np.abs(self.sens) ** 2, axis=0)
            if np.max(np.abs(rss - 1.0)) > 1e-10:
                raise ParameterError("coil sensitivities must satisfy sum_c |s_c|^2 = 1")

    @property
    def n_coils(self) -> int:
        return 1 if self.sens is None else self.sens.shape[0]

    @property
    def kspace_shape(self) -> tuple:
        if self.sens is None:
            return tuple(self.image_shape)
        return (self.sens.shape[0],) + tuple(self.image_shape)

    def _kmask(self) -> np.ndarray:
        # centered pattern -> natural FFT order, shaped (1, ny, nt) to broadcast over kx
        return np.fft.ifftshift(self.mask.pattern, axes=0)[None, :, :]

    def forward(self, x) -> np.ndarray:
        x = as_complex(x)
        if x.shape != tuple(self.image_shape):
            raise DimensionError(f"image shape {x.shape} != operator {tuple(self.image_shape)}")
        if self.sens is None:
            return fft2_frames(x) * self._kmask()
        coil_images = self.sens[..., None] * x[None]
        return fft2_frames(coil_images) * self._kmask()

    def adjoint(self, y) -> np.ndarray:
        y = as_complex(y)
        if y.shape != self.kspace_shape:
            raise DimensionError(f"k-space shape {y.shape} != operator {self.kspace_shape}")
        coil_images = ifft2_frames(y * self._kmask())
        if self.sens is None:
            return coil_images
        return np.sum(self.sens.conj()[..., None] * coil_images, axis=0)

    @property
    def sampled(self) -> np.ndarray:
        """0/1 weights broadcastable against k-space arrays."""
        return self._kmask()

    def normal(self, x) -> np.ndarray:
        """``A*A x``."""
        return self.adjoint(self.forward(x))


def forward(x, op: EncodingOperator) -> np.ndarray:
    return op.forward(x)


def adjoint(y, op: EncodingOperator) -> np.ndarray:
    return op.adjoint(y)


def grad_data_fidelity(x, y, op: EncodingOperator) -> np.ndarray:
    """Gradient ``A*(A x - y)`` of ``0.5 * ||A x - y||^2``."""
    return op.adjoint(op.forward(x) - as_complex(y))
