import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sapinn.errors import DomainError, StructuralError
from sapinn.loss import evaluate
from sapinn.mask import GROUPS, export_mask, init_mask, mask_gradient, read_mask, write_mask
from sapinn.network import ArchitectureSpec, init
from sapinn.optim import AdamState, adam_step
from sapinn.problems import get_problem
from sapinn.sampler import SamplerConfig, sample

AC_RANGES = {"r": (0, 1), "b": (1, 1), "0": (0, 100)}
AC_FLAGS = {"r": True, "b": False, "0": True}


def allen_cahn_points(n_r=20000, n_b=100, n_0=100, seed=0):
    return sample(get_problem("allen-cahn"), SamplerConfig(n_r, n_b, n_0, seed=seed))


def test_allen_cahn_initialization():
    m = init_mask((20000, 100, 100), AC_RANGES, AC_FLAGS, seed=1)
    assert m.lambda_r.min() >= 0 and m.lambda_r.max() <= 1
    assert m.lambda_0.min() >= 0 and m.lambda_0.max() <= 100
    assert m.lambda_0.max() > 50
    assert np.all(m.lambda_b == 1.0)
    assert not m.trainable["b"]


def test_degenerate_range_is_exactly_one():
    m = init_mask((5, 4, 3), {g: (1, 1) for g in GROUPS})
    for g in GROUPS:
        assert np.all(m.group(g) == 1.0)


def test_same_seed_same_mask():
    a = init_mask((50, 10, 10), AC_RANGES, AC_FLAGS, seed=7)
    b = init_mask((50, 10, 10), AC_RANGES, AC_FLAGS, seed=7)
    for g in GROUPS:
        assert np.array_equal(a.group(g), b.group(g))


def test_negative_low_rejected():
    with pytest.raises(DomainError):
        init_mask((3, 3, 3), {"r": (-0.1, 1)})


def test_gradient_example():
    m = init_mask((0, 0, 1), {"0": (3, 3)})
    g = mask_gradient(m, {"0": np.array([4.0])})
    assert g["0"].tolist() == [24.0]


def test_gradient_zero_weight_and_zero_error():
    m = init_mask((3, 0, 0), {"r": (0, 0)})
    assert mask_gradient(m, {"r": np.array([1.0, 2.0, 3.0])})["r"].tolist() == [0.0] * 3
    m = init_mask((3, 0, 0), {"r": (0.5, 2)})
    assert mask_gradient(m, {"r": np.zeros(3)})["r"].tolist() == [0.0] * 3


def test_gradient_length_mismatch():
    m = init_mask((3, 0, 0))
    with pytest.raises(StructuralError):
        mask_gradient(m, {"r": np.ones(4)})


def test_export_row_counts():
    pts = allen_cahn_points()
    m = init_mask(pts.counts, AC_RANGES, AC_FLAGS, seed=0)
    rows = export_mask(m, pts)
    assert len(rows) == 20200
    assert [r[2] for r in rows].count("r") == 20000
    assert all(r[3] == 1.0 for r in rows if r[2] == "b")
    assert all(r[0] == -1.0 for r in rows if r[2] == "b")


def test_export_round_trip(tmp_path):
    pts = allen_cahn_points(200, 20, 20)
    m = init_mask(pts.counts, AC_RANGES, AC_FLAGS, seed=3)
    write_mask(m, pts, tmp_path / "mask.csv")
    back, coords = read_mask(tmp_path / "mask.csv", m.trainable, m.init_ranges)
    for g in GROUPS:
        assert np.array_equal(back.group(g), m.group(g))
    assert np.array_equal(coords["r"], pts.residual)
    assert np.array_equal(coords["0"], pts.initial)


def test_export_count_mismatch():
    pts = allen_cahn_points(20, 4, 4)
    with pytest.raises(StructuralError):
        export_mask(init_mask((21, 4, 4)), pts)


def test_tape_gradient_matches_closed_form():
    prob = get_problem("burgers")
    pts = sample(prob, SamplerConfig(30, 8, 8, seed=2))
    net = init(ArchitectureSpec([2, 8, 8, 1], "tanh", 2))
    m = init_mask(pts.counts, {g: (0, 3) for g in GROUPS}, seed=2)
    ev = evaluate(net, m, pts, prob, "sa", params_grad=False, mask_grad=True)
    want = mask_gradient(m, ev.breakdown.pointwise_errors)
    for g in GROUPS:
        np.testing.assert_allclose(ev.mask_grads[g], want[g], rtol=1e-13, atol=1e-300)


def test_zero_error_point_is_fixed():
    prob = get_problem("burgers")
    pts = sample(prob, SamplerConfig(10, 4, 4, seed=0))
    m = init_mask(pts.counts, {g: (0.5, 1) for g in GROUPS}, seed=0)
    m.lambda_r[3] = 0.0
    net = init(ArchitectureSpec([2, 6, 1], "tanh", 0))
    state = AdamState.create(net, m, lr_lam=0.5, plain_mask=True)
    before = m.copy()
    adam_step(net, m, pts, prob, state)
    assert m.lambda_r[3] == 0.0
    assert np.all(m.lambda_r >= before.lambda_r)


def test_frozen_group_never_changes():
    prob = get_problem("allen-cahn")
    pts = sample(prob, SamplerConfig(40, 6, 6, seed=0))
    m = init_mask(pts.counts, AC_RANGES, AC_FLAGS, seed=0)
    net = init(ArchitectureSpec([2, 6, 1], "tanh", 0))
    state = AdamState.create(net, m, lr_lam=0.1)
    for _ in range(5):
        adam_step(net, m, pts, prob, state)
    assert np.all(m.lambda_b == 1.0)


def test_sign_flip_equivalence():
    prob = get_problem("helmholtz")
    pts = sample(prob, SamplerConfig(20, 8, 0, seed=5))
    net = init(ArchitectureSpec([2, 6, 1], "tanh", 5))
    m = init_mask(pts.counts, {g: (0, 1) for g in GROUPS}, seed=5)
    lr = 0.01
    ev = evaluate(net, m, pts, prob, "sa", params_grad=False, mask_grad=True)
    ascent = m.lambda_r + lr * ev.mask_grads["r"]
    neg = -ev.mask_grads["r"]
    descent_on_negative = m.lambda_r - lr * neg
    assert np.array_equal(ascent, descent_on_negative)
    state = AdamState.create(net, m, lr_w=0.0, lr_lam=lr, plain_mask=True)
    adam_step(net, m, pts, prob, state)
    assert np.array_equal(m.lambda_r, ascent)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), lr=st.floats(1e-4, 1.0))
def test_plain_ascent_is_monotone(seed, lr):
    prob = get_problem("burgers")
    pts = sample(prob, SamplerConfig(16, 4, 4, seed=seed))
    m = init_mask(pts.counts, {g: (0, 2) for g in GROUPS}, seed=seed)
    net = init(ArchitectureSpec([2, 6, 6, 1], "tanh", seed))
    state = AdamState.create(net, m, lr_lam=lr, plain_mask=True)
    for _ in range(5):
        before = m.copy()
        adam_step(net, m, pts, prob, state)
        for g in GROUPS:
            assert np.all(m.group(g) >= before.group(g))
