import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import crandn
from lsnet.exceptions import DataError, DimensionError
from lsnet.metrics import mse, psnr, ssim
from lsnet.phantom import PhantomSpec, generate_phantom


def scalar_ssim(a, b, data_range, win=7, k1=0.01, k2=0.03):
    """Loop-based reference: population statistics over every valid window."""
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    n = win * win
    total, count = 0.0, 0
    for i in range(len(a) - win + 1):
        for j in range(len(a[0]) - win + 1):
            xs = [a[i + u][j + v] for u in range(win) for v in range(win)]
            ys = [b[i + u][j + v] for u in range(win) for v in range(win)]
            mx = math.fsum(xs) / n
            my = math.fsum(ys) / n
            vx = math.fsum((x - mx) ** 2 for x in xs) / n
            vy = math.fsum((y - my) ** 2 for y in ys) / n
            cxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
            count += 1
    return total / count


def test_mse_values():
    x = np.ones((2, 2)) * (1 + 1j)
    assert mse(x, x) == 0
    assert mse(np.array([1.0]), np.array([0.0])) == 1
    assert mse(np.array([1.0, 0.0]), np.zeros(2)) == 0.5
    with pytest.raises(DimensionError):
        mse(np.zeros(2), np.zeros(3))


def test_psnr_values():
    ref = np.zeros(10000)
    ref[0] = 1.0
    x = ref + 0.01  # mse = 1e-4 exactly on every pixel
    assert psnr(x, ref) == 40.0
    assert psnr(ref, ref) == float("inf")
    x2 = ref + np.sqrt(2.91e-5)
    assert psnr(x2, ref) == pytest.approx(45.36, abs=0.005)
    with pytest.raises(DataError):
        psnr(np.ones(3), np.zeros(3))


@given(st.floats(1e-6, 1.0), st.floats(1.01, 10.0))
def test_psnr_decreases_with_mse(e, factor):
    ref = np.linspace(0.1, 1.0, 20)
    assert psnr(ref + e * factor, ref) < psnr(ref + e, ref)


def test_ssim_identity_exact():
    x, _, _ = generate_phantom(PhantomSpec())
    assert ssim(x, x) == 1.0
    y = crandn(np.random.default_rng(0), 9, 9, 2)
    assert ssim(y, y) == 1.0


def test_ssim_of_zero_image_is_small():
    # band frozen from a pilot run on the default phantom (0.0567)
    x, _, _ = generate_phantom(PhantomSpec())
    assert 0 < ssim(np.zeros_like(x), x) < 0.15


def test_ssim_matches_scalar_reference():
    rng = np.random.default_rng(5)
    ref = np.abs(crandn(rng, 16, 16))
    x = ref + 0.3 * rng.standard_normal((16, 16))
    got = ssim(x, ref)
    want = scalar_ssim(np.abs(x).tolist(), ref.tolist(), float(ref.max()))
    assert abs(got - want) <= 1e-10


@given(st.integers(0, 2**32 - 1))
def test_ssim_symmetric_with_fixed_range(seed):
    rng = np.random.default_rng(seed)
    a, b = crandn(rng, 8, 9, 2), crandn(rng, 8, 9, 2)
    assert ssim(a, b, data_range=3.0) == pytest.approx(ssim(b, a, data_range=3.0), abs=1e-14)
    assert -1 <= ssim(a, b) <= 1


def test_ssim_errors():
    with pytest.raises(DimensionError):
        ssim(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(DimensionError):
        ssim(np.ones((5, 5)), np.ones((5, 5)))
    with pytest.raises(DataError):
        ssim(np.ones((8, 8)), np.zeros((8, 8)))
