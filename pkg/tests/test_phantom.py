import numpy as np
import pytest

from lsnet.exceptions import ParameterError
from lsnet.metrics import psnr
from lsnet.phantom import (
    CoilConfig,
    MaskConfig,
    PhantomSpec,
    blob_support,
    generate_phantom,
    make_dataset,
    make_sample,
)
from lsnet.tensor import casorati


def test_rank_one_without_blobs():
    x, _, _ = generate_phantom(PhantomSpec(rank=1, n_blobs=0, seed=3))
    s = np.linalg.svd(casorati(x), compute_uv=False)
    assert s[1] / s[0] < 1e-10


def test_default_decomposition_properties():
    spec = PhantomSpec()
    x, L, S = generate_phantom(spec)
    s = np.linalg.svd(casorati(L), compute_uv=False)
    assert s[spec.rank] / s[0] < 1e-10 and s[spec.rank - 1] / s[0] > 1e-6
    frac = np.mean(np.abs(S) > 0, axis=(0, 1))
    assert np.all(frac <= 0.10) and np.all(frac > 0)
    assert x.tobytes() == (L + S).tobytes()
    assert np.max(np.abs(x)) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(blob_support(spec), np.abs(S) > 0)


def test_blobs_move():
    _, _, S = generate_phantom(PhantomSpec(seed=2))
    sup = np.abs(S) > 0
    assert any(not np.array_equal(sup[..., 0], sup[..., t]) for t in range(1, sup.shape[2]))


def test_same_seed_bit_identical():
    a = generate_phantom(PhantomSpec(seed=9))
    b = generate_phantom(PhantomSpec(seed=9))
    assert all(u.tobytes() == v.tobytes() for u, v in zip(a, b))


def test_spec_validation():
    for bad in (dict(rank=9), dict(rank=0), dict(nx=4), dict(n_blobs=-1)):
        with pytest.raises(ParameterError):
            PhantomSpec(**bad).validate()


def test_full_mask_adjoint_recovers():
    s = make_sample(PhantomSpec(seed=1), MaskConfig(1.0, 0))
    assert np.max(np.abs(s.op.adjoint(s.y) - s.x_ref)) <= 1e-12


def test_zero_filled_psnr_band():
    s = make_sample(PhantomSpec(), MaskConfig(4.0, 4))
    assert 8 < psnr(s.op.adjoint(s.y), s.x_ref) < 35


def test_noise_only_on_sampled_locations():
    spec = PhantomSpec(noise_std=0.01)
    s = make_sample(spec, MaskConfig(4.0, 4), CoilConfig(3))
    clean = s.op.forward(s.x_ref)
    d = s.y - clean
    sampled = np.broadcast_to(s.op.sampled, d.shape).astype(bool)
    assert np.all(d[~sampled] == 0) and np.std(d[sampled].real) == pytest.approx(0.01, rel=0.1)
    again = make_sample(spec, MaskConfig(4.0, 4), CoilConfig(3))
    assert again.y.tobytes() == s.y.tobytes()


def test_dataset_seeds_distinct():
    data = make_dataset(4, PhantomSpec(nx=16, ny=16, nt=4), MaskConfig(2.0, 2), seed=1)
    seeds = {d.spec.seed for d in data}
    assert len(seeds) == 4
    assert make_dataset(0, PhantomSpec(), MaskConfig()) == []
