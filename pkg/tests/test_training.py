import numpy as np
import pytest

from lsnet.encoding import EncodingOperator, SamplingMask
from lsnet.exceptions import NumericError, ParameterError
from lsnet.phantom import MaskConfig, PhantomSpec, Sample, make_dataset, make_sample
from lsnet.training import AdamState, TrainConfig, TrainRecord, adam_step, lr_at_epoch, train
from lsnet.unrolled import LsNetParams

PLAN = (4, 2, 2, 2)


@pytest.fixture(scope="module")
def small_data():
    return make_dataset(3, PhantomSpec(nx=8, ny=8, nt=4), MaskConfig(2.0, 2), seed=4)


def test_adam_zero_grad_keeps_params():
    p = [np.array([1.0, -2.0])]
    st = AdamState.zeros_like(p)
    adam_step(p, [np.zeros(2)], st, 0.1)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_first_steps_hand_values():
    p = [np.array([0.0])]
    st = AdamState.zeros_like(p)
    adam_step(p, [np.array([1.0])], st, 0.1)
    assert p[0][0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)
    adam_step(p, [np.array([1.0])], st, 0.1)
    # with a constant gradient both bias-corrected moments stay at 1
    assert p[0][0] == pytest.approx(-0.2 / (1 + 1e-8), abs=1e-6)
    assert st.t == 2 and np.all(st.v[0] >= 0)


def test_adam_rejects_nan_and_shape_mismatch():
    p = [np.zeros(2)]
    with pytest.raises(NumericError):
        adam_step(p, [np.array([np.nan, 0.0])], AdamState.zeros_like(p), 0.1)
    with pytest.raises(ParameterError):
        adam_step(p, [np.zeros(3)], AdamState.zeros_like([np.zeros(3)]), 0.1)


def test_lr_schedule():
    cfg = TrainConfig()
    assert lr_at_epoch(0, cfg) == 0.001
    assert lr_at_epoch(10, cfg) == pytest.approx(0.001 * 0.95**10, rel=1e-15)
    assert lr_at_epoch(10, cfg) == pytest.approx(5.987e-4, rel=1e-3)
    lrs = [lr_at_epoch(e, cfg) for e in range(20)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))
    with pytest.raises(ParameterError):
        lr_at_epoch(-1, cfg)


def test_config_validation():
    for bad in (dict(lr0=0), dict(decay=0), dict(decay=1.5), dict(epochs=-1), dict(batch_size=2)):
        with pytest.raises(ParameterError):
            TrainConfig(**bad).validate()


def test_zero_epochs_is_identity(small_data):
    p = LsNetParams.initial(2, PLAN, seed=1)
    before = [a.copy() for a in p.arrays()]
    out, rec = train(p, small_data, TrainConfig(epochs=0))
    assert rec.losses == [] and all(np.array_equal(a, b) for a, b in zip(before, out.arrays()))


def test_empty_dataset_rejected():
    with pytest.raises(ParameterError):
        train(LsNetParams.initial(1, PLAN), [], TrainConfig(epochs=1))


def test_exact_data_keeps_zero_loss():
    s = make_sample(PhantomSpec(nx=8, ny=8, nt=4), MaskConfig(1.0, 0))
    op = EncodingOperator(SamplingMask(np.ones((8, 4)), 1.0, 0, 0), s.x_ref.shape)
    data = [Sample(op.forward(s.x_ref), op, s.x_ref)]
    p = LsNetParams.zeros_like_plan(1, PLAN, beta=-30.0)
    _, rec = train(p, data, TrainConfig(epochs=3))
    assert max(rec.losses) <= 1e-10


def test_training_deterministic(small_data):
    cfg = TrainConfig(epochs=2, lr0=3e-3, shuffle=True, seed=3)
    a, _ = train(LsNetParams.initial(2, PLAN, seed=2), small_data, cfg)
    b, _ = train(LsNetParams.initial(2, PLAN, seed=2), small_data, cfg)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.arrays(), b.arrays()))


def test_resume_equals_uninterrupted(small_data):
    full, rec_full = train(LsNetParams.initial(2, PLAN, seed=2), small_data,
                           TrainConfig(epochs=3, lr0=3e-3))
    part, rec = train(LsNetParams.initial(2, PLAN, seed=2), small_data,
                      TrainConfig(epochs=2, lr0=3e-3))
    resumed, rec = train(part, small_data, TrainConfig(epochs=3, lr0=3e-3), rec)
    assert rec.losses == rec_full.losses
    assert all(x.tobytes() == y.tobytes() for x, y in zip(full.arrays(), resumed.arrays()))


def test_divergence_guard(small_data):
    p = LsNetParams.initial(2, PLAN, seed=2)
    _, rec = train(p, small_data, TrainConfig(epochs=4, lr0=5.0, divergence_factor=1.0))
    assert rec.diverged and rec.epoch < 4


def test_callback_and_records(small_data):
    seen = []
    _, rec = train(LsNetParams.initial(1, PLAN), small_data, TrainConfig(epochs=2),
                   callback=lambda e, p, r: seen.append(e))
    assert seen == [1, 2] and len(rec.lrs) == 2 and isinstance(rec, TrainRecord)
