"""Image quality metrics for complex dynamic reconstructions.

MSE and PSNR use the complex error; SSIM is computed on magnitude frames.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DataError, DimensionError

__all__ = ["mse", "psnr", "ssim", "SSIM_WINDOW", "SSIM_K1", "SSIM_K2"]

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(x, ref):
    x = np.asarray(x)
    ref = np.asarray(ref)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {ref.shape}")
    return x, ref


def mse(x, ref) -> float:
    """Mean over all pixels of ``|x - ref|^2``."""
    x, ref = _pair(x, ref)
    if x.size == 0:
        raise DimensionError("empty inputs")
    d = x - ref
    return float(np.mean(d.real**2 + d.imag**2))


def psnr(x, ref) -> float:
    """``10 log10(peak^2 / mse)`` with ``peak = max|ref|``; ``inf`` when the
    images are identical."""
    x, ref = _pair(x, ref)
    peak = float(np.max(np.abs(ref))) if ref.size else 0.0
    if peak == 0.0:
        raise DataError("PSNR is undefined for an all-zero reference")
    err = mse(x, ref)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / err))


def _frame_ssim(a, b, c1, c2, win):
    wa = sliding_window_view(a, (win, win))
    wb = sliding_window_view(b, (win, win))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    va = (wa**2).mean(axis=(-2, -1)) - mu_a**2
    vb = (wb**2).mean(axis=(-2, -1)) - mu_b**2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (va + vb + c2)
    return num / den


def ssim(x, ref, data_range: float | None = None, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity of magnitude frames.

    Arrays are ``(nx, ny)`` or ``(nx, ny, nt)``. Each frame is scanned with a
    ``window x window`` uniform window over valid positions (no padding);
    local statistics use population (1/N) moments. The score is the mean
    over windows and frames. ``data_range`` defaults to ``max|ref|``.
    """
    x, ref = _pair(x, ref)
    if x.ndim == 2:
        x, ref = x[..., None], ref[..., None]
    if x.ndim != 3:
        raise DimensionError(f"expected 2-D or 3-D images, got {x.ndim} dims")
    if min(x.shape[:2]) < window:
        raise DimensionError(f"frames {x.shape[:2]} smaller than the {window}x{window} window")
    a = np.abs(x).astype(np.float64)
    b = np.abs(ref).astype(np.float64)
    rng = float(np.max(b)) if data_range is None else float(data_range)
    if rng <= 0:
        raise DataError("SSIM needs a positive dynamic range")
    c1 = (SSIM_K1 * rng) ** 2
    c2 = (SSIM_K2 * rng) ** 2
    scores = [_frame_ssim(a[..., t], b[..., t], c1, c2, window).mean() for t in range(a.shape[2])]
    return float(np.mean(scores))
