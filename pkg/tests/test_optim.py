import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import rosen, rosen_der

from sapinn.config import preset
from sapinn.errors import NumericError, StructuralError
from sapinn.mask import GROUPS, init_mask
from sapinn.network import ArchitectureSpec, init
from sapinn.optim import (
    AdamState,
    LbfgsState,
    adam_step,
    aggregate,
    lbfgs_minimize,
    lbfgs_run,
    train,
    wolfe_search,
)
from sapinn.problems import get_problem
from sapinn.reference import get_reference
from sapinn.sampler import SamplerConfig, sample


def small(name="burgers", seed=0):
    prob = get_problem(name)
    pts = sample(prob, SamplerConfig(24, 6, 0 if name == "helmholtz" else 6, seed=seed))
    net = init(ArchitectureSpec([2, 6, 6, 1], "tanh", seed))
    mask = init_mask(pts.counts, {g: (0, 1) for g in GROUPS}, seed=seed)
    return prob, pts, net, mask


def rosenbrock(x):
    return rosen(x), rosen_der(x)


def quadratic(n, cond, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = q @ np.diag(np.geomspace(1.0, cond, n)) @ q.T
    b = rng.normal(size=n)
    return A, b, np.linalg.solve(A, b)


def test_adam_first_step_is_minus_learning_rate():
    # f(w) = w * g: the bias-corrected first step has magnitude lr
    g = 3.7
    state = AdamState([np.zeros(1)], [np.zeros(1)], {}, {}, lr_w=1e-3)
    w = np.array([0.5])
    state.step = 1
    from sapinn.optim.adam import _moment_update

    _moment_update(w, np.array([g]), state.m_w[0], state.v_w[0], state.lr_w, state)
    assert w[0] == pytest.approx(0.5 - 1e-3, rel=1e-8)


def test_zero_error_group_is_unchanged():
    prob, pts, net, mask = small()
    pts.boundary_values[:] = 0.0
    mask.lambda_b[:] = 0.0
    state = AdamState.create(net, mask, lr_lam=0.1)
    adam_step(net, mask, pts, prob, state)
    assert np.all(mask.lambda_b == 0.0)
    assert np.all(state.m_lam["b"] == 0.0) and np.all(state.v_lam["b"] == 0.0)


def test_zero_mask_rate_reproduces_baseline():
    prob, pts, net_a, _ = small(seed=4)
    net_b = net_a.copy()
    ones = init_mask(pts.counts)
    sa = AdamState.create(net_a, ones, lr_lam=0.0)
    base = AdamState.create(net_b, None)
    for _ in range(3):
        _, _, _, bd_a = adam_step(net_a, ones, pts, prob, sa, "sa")
        _, _, _, bd_b = adam_step(net_b, None, pts, prob, base, "baseline")
        assert bd_a.total == bd_b.total
    assert np.array_equal(net_a.to_vector(), net_b.to_vector())
    assert np.all(ones.lambda_r == 1.0)


def test_adam_weights_descend_and_mask_ascends():
    prob, pts, net, mask = small(seed=2)
    before = mask.copy()
    state = AdamState.create(net, mask, lr_w=1e-3, lr_lam=1e-2)
    for _ in range(20):
        adam_step(net, mask, pts, prob, state)
    grew = [np.mean(mask.group(g) - before.group(g)) for g in GROUPS]
    assert all(v > 0 for v in grew)


def test_adam_descent_ascent_antisymmetry():
    prob, pts, net, mask = small(seed=6)
    ascent_mask = mask.copy()
    state = AdamState.create(net.copy(), ascent_mask, lr_w=0.0, lr_lam=0.05)
    from sapinn.loss import evaluate
    from sapinn.optim.adam import _moment_update

    ev = evaluate(net, mask, pts, prob, "sa", params_grad=False, mask_grad=True)
    adam_step(net.copy(), ascent_mask, pts, prob, state)
    ref = AdamState.create(net, mask, lr_lam=0.05)
    ref.step = 1
    for g in GROUPS:
        lam = mask.group(g).copy()
        # descend on the negated loss
        _moment_update(lam, -ev.mask_grads[g], ref.m_lam[g], ref.v_lam[g], 0.05, ref)
        assert np.array_equal(lam, ascent_mask.group(g))


def test_adam_state_shape_check():
    prob, pts, net, mask = small()
    state = AdamState.create(init(ArchitectureSpec([2, 5, 1], "tanh", 0)), mask)
    with pytest.raises(StructuralError):
        adam_step(net, mask, pts, prob, state)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_adam_non_finite_gradient_names_the_array():
    prob, pts, net, mask = small()
    state = AdamState.create(net, mask)
    net.weights[0][0, 0] = 1e308
    with pytest.raises(NumericError):
        adam_step(net, mask, pts, prob, state)


def test_rosenbrock():
    res = lbfgs_minimize(rosenbrock, [-1.2, 1.0], max_iters=200, tolerance=1e-8)
    assert res.status == "converged"
    assert res.grad_norm < 1e-8
    assert res.iterations <= 200
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-8)
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


@pytest.mark.parametrize("cond", [10.0, 1e3, 1e6])
def test_quadratic_termination(cond):
    A, b, x_star = quadratic(10, cond, int(cond))
    fun = lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b)
    res = lbfgs_minimize(fun, np.zeros(10), max_iters=12, tolerance=1e-12)
    assert res.iterations <= 12
    assert np.max(np.abs(res.x - x_star)) < 1e-10


def test_zero_gradient_start():
    res = lbfgs_minimize(lambda x: (float(x @ x), 2 * x), np.zeros(3), tolerance=1e-12)
    assert res.iterations == 0 and res.status == "converged"


def test_history_is_bounded_and_curvature_checked():
    state = LbfgsState(memory=3)
    for k in range(6):
        state.push(np.array([1.0, k]), np.array([1.0, 0.0]))
    assert len(state.s_hist) == 3
    state.push(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    assert len(state.s_hist) == 3


def test_wolfe_conditions_hold():
    A, b, _ = quadratic(5, 50.0, 1)
    fun = lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b)
    x = np.ones(5)
    f0, g = fun(x)
    d = -g
    alpha, f1, g1, _ = wolfe_search(fun, x, f0, g, d, 1.0, refine=False)
    assert f1 <= f0 + 1e-4 * alpha * (g @ d)
    assert abs(g1 @ d) <= 0.9 * abs(g @ d)


def test_line_search_failure_reports_status():
    # a gradient that disagrees with the function defeats every line search
    fun = lambda x: (float(x @ x), -2 * x)
    res = lbfgs_minimize(fun, np.ones(2), max_iters=10, tolerance=1e-12)
    assert res.status == "line-search-failed"
    assert res.iterations == 0


def test_lbfgs_run_freezes_the_mask_and_descends():
    prob, pts, net, mask = small(seed=3)
    frozen = mask.copy()
    net, res = lbfgs_run(net, mask, pts, prob, 30)
    for g in GROUPS:
        assert np.array_equal(mask.group(g), frozen.group(g))
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.trace[-1] < res.trace[0]


def test_lbfgs_run_zero_iterations():
    prob, pts, net, mask = small()
    theta = net.to_vector()
    net, res = lbfgs_run(net, mask, pts, prob, 0)
    assert res.iterations == 0
    assert np.array_equal(net.to_vector(), theta)


def test_train_without_iterations_reports_untrained_error():
    cfg = preset("burgers-tiny", adam_iters=0, lbfgs_iters=0)
    rep = train(cfg)
    assert rep.status == "ok"
    assert rep.loss_trace == []
    assert len(rep.records) == 1 and rep.records[0]["phase"] == "final"
    assert rep.l2_error > 0.1


def test_train_baseline_keeps_a_unit_mask():
    cfg = preset("burgers-tiny", mode="baseline", adam_iters=20, lbfgs_iters=5)
    rep = train(cfg)
    assert rep.status.startswith("ok")
    for g in GROUPS:
        assert np.all(rep.mask.group(g) == 1.0)
    assert all("mask" not in r or r["mask"] == {} for r in rep.records)


def test_train_records_both_phases():
    cfg = preset("burgers-tiny", adam_iters=30, lbfgs_iters=10, log_every=10)
    rep = train(cfg)
    phases = [r["phase"] for r in rep.records]
    assert phases.count("adam") == 3
    assert "lbfgs" in phases and phases[-1] == "final"
    assert len(rep.loss_trace) >= 30
    adam_trace = rep.loss_trace[30:]
    assert all(b <= a for a, b in zip(adam_trace, adam_trace[1:]))


def test_secant_refinement_switch_reaches_lbfgs():
    plain = train(preset("burgers-tiny", adam_iters=5, lbfgs_iters=10))
    refined = train(preset("burgers-tiny", adam_iters=5, lbfgs_iters=10, lbfgs_refine=True))
    assert plain.loss_trace[:5] == refined.loss_trace[:5]
    assert plain.loss_trace[5:] != refined.loss_trace[5:]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_failure_is_recorded():
    cfg = preset("burgers-tiny", adam_iters=5, lbfgs_iters=0, lr_w=1e300)
    rep = train(cfg)
    assert rep.status.startswith("failed")
    assert rep.net is not None


def test_aggregate_uses_population_std():
    class R:
        def __init__(self, e):
            self.l2_error = e

    agg = aggregate([R(1.0), R(3.0), R(None)])
    assert agg == {"n": 2, "l2_mean": 2.0, "l2_std": 1.0}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), lr=st.floats(1e-3, 0.5))
def test_plain_ascent_never_decreases_a_weight(seed, lr):
    name = ("allen-cahn", "burgers", "helmholtz")[seed % 3]
    prob, pts, net, mask = small(name, seed)
    state = AdamState.create(net, mask, lr_lam=lr, plain_mask=True)
    for _ in range(3):
        before = mask.copy()
        adam_step(net, mask, pts, prob, state)
        for g in GROUPS:
            assert np.all(mask.group(g) >= before.group(g))


def test_reference_cache_is_used_by_train():
    grid = get_reference("burgers", (64, 21))
    assert grid.provenance == "analytic"
