"""Synthetic dynamic phantoms with a known low-rank + sparse split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import EncodingOperator, make_cartesian_mask, make_sensitivities
from .exceptions import ParameterError

__all__ = [
    "PhantomSpec",
    "MaskConfig",
    "CoilConfig",
    "Sample",
    "generate_phantom",
    "blob_support",
    "make_sample",
    "make_dataset",
]


# peak magnitude of the dynamic background modes relative to the static one
DYNAMIC_AMPLITUDE = 0.3


@dataclass(frozen=True)
class PhantomSpec:
    nx: int = 32
    ny: int = 32
    nt: int = 8
    rank: int = 3
    n_blobs: int = 2
    noise_std: float = 0.0
    seed: int = 0

    def validate(self):
        if min(self.nx, self.ny) < 8 or self.nt < 1:
            raise ParameterError("phantom extents must be >= 8 (space) and >= 1 (time)")
        if not 1 <= self.rank <= self.nt:
            raise ParameterError(f"rank must be in [1, nt], got {self.rank}")
        if self.n_blobs < 0:
            raise ParameterError("n_blobs must be >= 0")


@dataclass(frozen=True)
class MaskConfig:
    af: float = 4.0
    n_center: int = 4
    seed: int = 0


@dataclass(frozen=True)
class CoilConfig:
    n_coils: int = 4
    seed: int = 0


@dataclass(frozen=True)
class Sample:
    y: np.ndarray
    op: EncodingOperator
    x_ref: np.ndarray
    spec: PhantomSpec | None = None


def _gaussian_bumps(rng, gx, gy, n):
    out = np.zeros_like(gx)
    for _ in range(n):
        cx, cy = rng.uniform(-0.3, 0.3, size=2)
        w = rng.uniform(0.15, 0.35)
        out += rng.uniform(0.5, 1.0) * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * w**2))
    return out


def _body(rng, gx, gy):
    """Soft-edged elliptical object support; zero outside (air)."""
    ax, ay = rng.uniform(0.32, 0.40, size=2)
    r = np.sqrt((gx / ax) ** 2 + (gy / ay) ** 2)
    edge = 0.03 / min(ax, ay)
    return np.clip((1.0 - r) / edge + 0.5, 0.0, 1.0)


def _blobs(rng, spec, gx, gy):
    """Soft elliptical blobs ``(1 - r^2)_+`` on small periodic orbits.

    Returns a list of ``(nx, ny, nt)`` nonnegative arrays.
    """
    t = np.arange(spec.nt)
    cap = np.sqrt(0.08 / (np.pi * max(spec.n_blobs, 1)))
    blobs = []
    for _ in range(spec.n_blobs):
        a = min(rng.uniform(0.06, 0.09), cap)
        b = min(rng.uniform(0.06, 0.09), cap)
        cx, cy = rng.uniform(-0.2, 0.2, size=2)
        radius = rng.uniform(0.02, 0.05)
        phase = rng.uniform(0, 2 * np.pi)
        px = cx + radius * np.cos(2 * np.pi * t / spec.nt + phase)
        py = cy + radius * np.sin(2 * np.pi * t / spec.nt + phase)
        r2 = ((gx[..., None] - px) / a) ** 2 + ((gy[..., None] - py) / b) ** 2
        blobs.append(np.maximum(1.0 - r2, 0.0))
    return blobs


def _temporal_profile(rng, nt):
    """Zero-mean smooth periodic profile with peak magnitude 1."""
    t = np.arange(nt) / nt
    c = np.zeros(nt)
    for f in range(1, max(nt // 2, 1) + 1):
        c += (rng.normal() * np.cos(2 * np.pi * f * t) + rng.normal() * np.sin(2 * np.pi * f * t)) / f**2
    c -= c.mean()
    peak = np.abs(c).max()
    return c / peak if peak > 0 else c


def generate_phantom(spec: PhantomSpec):
    """Return ``(x, L_true, S_true)`` with ``x == L_true + S_true``.

    The background is a static spatial mode plus ``rank - 1`` weak
    space-time products with zero-mean temporal profiles (Casorati rank
    exactly ``rank``). The foreground is a set of soft blobs moving on small
    periodic orbits. A smooth spatial phase multiplies both parts and the
    result is scaled so that ``max |x| == 1``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    xs = (np.arange(spec.nx) - (spec.nx - 1) / 2) / spec.nx
    ys = (np.arange(spec.ny) - (spec.ny - 1) / 2) / spec.ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")

    body = _body(rng, gx, gy)
    modes = [body * (0.5 + _gaussian_bumps(rng, gx, gy, 3))]
    profiles = [np.ones(spec.nt)]
    for _ in range(1, spec.rank):
        modes.append(body * _gaussian_bumps(rng, gx, gy, 3))
        profiles.append(DYNAMIC_AMPLITUDE * _temporal_profile(rng, spec.nt))
    low_rank = np.einsum("jxy,jt->xyt", np.array(modes), np.array(profiles))

    sparse = np.zeros_like(low_rank)
    peak = np.abs(low_rank).max()
    for blob in _blobs(rng, spec, gx, gy):
        sparse += rng.uniform(0.8, 1.2) * peak * blob

    frac = (sparse > 0).reshape(-1, spec.nt).mean(axis=0)
    if np.any(frac > 0.10):
        raise ParameterError("blob support exceeds 10% of the frame")

    p, q = rng.uniform(-1.0, 1.0, size=2)
    phase = np.exp(1j * (np.pi * (p * gx + q * gy) + rng.uniform(0, 2 * np.pi)))[..., None]
    low_rank = low_rank * phase
    sparse = sparse * phase
    scale = 1.0 / np.abs(low_rank + sparse).max()
    low_rank = low_rank * scale
    sparse = sparse * scale
    return low_rank + sparse, low_rank, sparse


def blob_support(spec: PhantomSpec) -> np.ndarray:
    """Boolean ``(nx, ny, nt)`` support of the dynamic foreground."""
    _, _, sparse = generate_phantom(spec)
    return np.abs(sparse) > 0


def make_sample(spec: PhantomSpec, mask_cfg: MaskConfig, coil_cfg: CoilConfig | None = None,
                noise_std: float | None = None) -> Sample:
    """Retrospectively undersample a phantom: ``y = A x_ref + noise``.

    Noise is complex Gaussian with standard deviation ``noise_std`` per real
    component, added on sampled k-space locations only.
    """
    x_ref, _, _ = generate_phantom(spec)
    mask = make_cartesian_mask(spec.ny, spec.nt, mask_cfg.af, mask_cfg.n_center, mask_cfg.seed)
    sens = None
    if coil_cfg is not None and coil_cfg.n_coils > 1:
        sens = make_sensitivities(coil_cfg.n_coils, spec.nx, spec.ny, coil_cfg.seed)
    op = EncodingOperator(mask, (spec.nx, spec.ny, spec.nt), sens)
    y = op.forward(x_ref)
    std = spec.noise_std if noise_std is None else noise_std
    if std > 0:
        rng = np.random.default_rng([spec.seed, mask_cfg.seed, 7919])
        noise = rng.normal(scale=std, size=y.shape) + 1j * rng.normal(scale=std, size=y.shape)
        y = y + noise * op.sampled
    return Sample(y, op, x_ref, spec)


def make_dataset(n, spec: PhantomSpec, mask_cfg: MaskConfig, coil_cfg: CoilConfig | None = None,
                 seed: int = 0) -> list[Sample]:
    """``n`` samples with per-sample phantom and mask seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(2 * n) if n else []
    out = []
    for i in range(n):
        ps = PhantomSpec(spec.nx, spec.ny, spec.nt, spec.rank, spec.n_blobs, spec.noise_std,
                         int(seeds[2 * i]))
        mc = MaskConfig(mask_cfg.af, mask_cfg.n_center, int(seeds[2 * i + 1]))
        out.append(make_sample(ps, mc, coil_cfg))
    return out
