"""Shared test utilities: random complex data and central differences."""
import numpy as np


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def central_diff_complex(f, z, h=1e-6):
    """Gradient of real ``f`` at complex array ``z`` as ``df/dRe + i df/dIm``."""
    z = np.array(z, dtype=np.complex128)
    g = np.zeros_like(z)
    flat = z.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        for unit in (1.0, 1j):
            old = flat[i]
            flat[i] = old + unit * h
            fp = f(z)
            flat[i] = old - unit * h
            fm = f(z)
            flat[i] = old
            gflat[i] += unit * (fp - fm) / (2 * h)
    return g


def central_diff_real(f, a, h=1e-6):
    """Gradient of real ``f`` with respect to the real array ``a`` (mutated and restored)."""
    g = np.zeros_like(a)
    flat = a.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    """Elementwise ``|a - b| / max(|a|, |b|, floor)``; the floor keeps
    gradients that are zero in exact arithmetic from dividing by round-off."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
