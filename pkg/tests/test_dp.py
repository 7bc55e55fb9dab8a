"""One-step exact solve and full backward induction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwldp import (
    HFunc,
    StepInputs,
    StepResult,
    backstep,
    crr_spec,
    policy_at,
    solve,
)

from conftest import brute_force_value, hfuncs, make_hfunc


TOY = dict(p=0.5, q=1.0 / 3.0, u=2.0, d=0.5, R=1.0)


def toy_inputs(vu=None, vd=None):
    f = HFunc([0.0], [0.0], 1.0)  # min(w, 0)
    return StepInputs(vu=vu or f, vd=vd or f, **TOY)


# -- input validation -------------------------------------------------------


def test_rejects_probabilities_out_of_range():
    f = HFunc([0.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        StepInputs(vu=f, vd=f, p=1.5, q=1 / 3, u=2.0, d=0.5, R=1.0).validate()


def test_rejects_arbitrage_returns():
    f = HFunc([0.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        StepInputs(vu=f, vd=f, p=0.5, q=0.5, u=2.0, d=0.5, R=3.0).validate()


def test_rejects_inconsistent_risk_neutral_probability():
    f = HFunc([0.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        StepInputs(vu=f, vd=f, p=0.5, q=0.4, u=2.0, d=0.5, R=1.0).validate()


# -- worked one-step example ------------------------------------------------


def test_toy_value_function():
    res = backstep(toy_inputs())
    v = res.value
    assert v.n == 1
    assert v.xs[0] == pytest.approx(0.0, abs=1e-12)
    assert v.vs[0] == pytest.approx(0.0, abs=1e-12)
    assert v.slope_left == pytest.approx(0.75, abs=1e-12)
    ws = np.linspace(-4, 4, 41)
    assert v.evaluate(ws) == pytest.approx(0.75 * np.minimum(ws, 0.0), abs=1e-12)


def test_toy_policy_below_kink():
    res = backstep(toy_inputs())
    assert policy_at(res, -2.0) == pytest.approx(2.0, abs=1e-12)
    ws = np.linspace(-4, 0, 17)
    assert policy_at(res, ws) == pytest.approx(-ws, abs=1e-12)


def test_toy_policy_at_kink():
    res = backstep(toy_inputs())
    assert policy_at(res, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_toy_policy_above_last_kink_follows_up_line():
    res = backstep(toy_inputs())
    # ray through the up-successor's last kink: beta = (0 - w*R)/(u - R)
    assert policy_at(res, 3.0) == pytest.approx(-3.0, abs=1e-12)


def test_plateau_successors_give_plateau():
    vu = HFunc([0.0], [2.0], 1.0)
    vd = HFunc([0.0], [1.0], 1.0)
    res = backstep(StepInputs(vu=vu, vd=vd, **TOY))
    v = res.value
    assert v.n == 1
    assert v.vs[0] == pytest.approx(0.5 * 2.0 + 0.5 * 1.0, abs=1e-15)


def test_kink_count_bound():
    rng = np.random.default_rng(7)
    for _ in range(50):
        vu = make_hfunc(rng)
        vd = make_hfunc(rng)
        res = backstep(StepInputs(vu=vu, vd=vd, **TOY))
        assert res.value.n <= vu.n + vd.n - 1 + 1  # +1: root seed point


# -- brute-force agreement --------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(hfuncs(max_kinks=5), hfuncs(max_kinks=5), st.integers(0, 2**32 - 1))
def test_one_step_matches_dense_grid(vu, vd, seed):
    inputs = StepInputs(vu=vu, vd=vd, **TOY)
    res = backstep(inputs)
    rng = np.random.default_rng(seed)
    b_grid = np.arange(-30.0, 30.0, 1e-3)
    for w in rng.uniform(-5, 5, size=5):
        bf, _ = brute_force_value(vu, vd, TOY["p"], TOY["u"], TOY["d"], TOY["R"], w, b_grid)
        assert res.value.evaluate(w) >= bf - 1e-12
        assert res.value.evaluate(w) <= bf + 5e-3  # grid resolution slack


@settings(max_examples=30, deadline=None)
@given(hfuncs(max_kinks=5), hfuncs(max_kinks=5), st.integers(0, 2**32 - 1))
def test_policy_is_one_step_optimal(vu, vd, seed):
    inputs = StepInputs(vu=vu, vd=vd, **TOY)
    res = backstep(inputs)
    rng = np.random.default_rng(seed)
    for w in rng.uniform(-5, 5, size=5):
        b = policy_at(res, w)
        base = inputs.objective(w, b)
        perturbed = inputs.objective(w, b + rng.uniform(-3, 3, size=200))
        assert np.max(perturbed) <= base + 1e-9


def test_policy_kinks_lie_on_grid_lines():
    rng = np.random.default_rng(11)
    for _ in range(20):
        vu = make_hfunc(rng)
        vd = make_hfunc(rng)
        res = backstep(StepInputs(vu=vu, vd=vd, **TOY))
        u, d, R = TOY["u"], TOY["d"], TOY["R"]
        for w, b in zip(res.policy_x, res.policy_beta):
            up_target = w * R + b * (u - R)
            dn_target = w * R + b * (d - R)
            assert np.min(np.abs(vu.xs - up_target)) <= 1e-9
            assert np.min(np.abs(vd.xs - dn_target)) <= 1e-9


def test_value_at_kinks_matches_objective_at_policy():
    rng = np.random.default_rng(13)
    for _ in range(20):
        vu = make_hfunc(rng)
        vd = make_hfunc(rng)
        inputs = StepInputs(vu=vu, vd=vd, **TOY)
        res = backstep(inputs)
        for w in res.value.xs:
            b = policy_at(res, w)
            assert res.value.evaluate(w) == pytest.approx(
                inputs.objective(float(w), b), abs=1e-10
            )


# -- full sweep -------------------------------------------------------------


def test_terminal_layer_is_stored():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=3, mu=0.015)
    U = HFunc([0.0, 1.0], [0.0, 1.0], 2.0)
    surf = solve(spec, U)
    for k in range(4):
        node = surf.node(3, k)
        assert np.array_equal(node.value.xs, U.xs)
        assert node.policy_x is None


def test_terminal_node_has_no_policy():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=2, mu=0.015)
    U = HFunc([0.0, 1.0], [0.0, 1.0], 2.0)
    surf = solve(spec, U)
    with pytest.raises(ValueError):
        policy_at(surf.node(2, 0), 1.0)


def test_three_step_root_matches_dense_grid():
    spec = crr_spec(s0=5.0, sigma=0.30, r=0.01, T=0.3, n=3, mu=0.05)
    rng = np.random.default_rng(3)
    U = make_hfunc(rng, max_kinks=4)
    surf = solve(spec, U)
    # brute-force two-level nested maximization is expensive; instead compare
    # against recomputing the root from stored successor layers
    c = spec.coeffs(0, 0)
    from pwldp import StepInputs as SI

    redo = backstep(
        SI(vu=surf.node(1, 1).value, vd=surf.node(1, 0).value,
           p=c.p, q=c.q, u=c.u, d=c.d, R=c.R)
    )
    ws = np.linspace(-5, 5, 100)
    assert surf.root.value.evaluate(ws) == pytest.approx(redo.value.evaluate(ws), abs=0)


def test_zero_step_solve_returns_terminal():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=1, mu=0.015)
    U = HFunc([0.0, 1.0], [0.0, 1.0], 2.0)
    surf = solve(spec, U, keep="all")
    assert (1, 0) in surf


def test_pruned_sweep_respects_accumulated_bound():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=10, mu=0.015)
    U = HFunc(np.linspace(0, 4, 9), np.sqrt(np.linspace(0, 4, 9) + 0.1), 2.0)
    exact = solve(spec, U).root.value
    for eps in (1e-3, 1e-2):
        pruned = solve(spec, U, eps_step=eps).root.value
        grid = np.linspace(-2, 6, 2000)
        gap = np.max(np.abs(exact.evaluate(grid) - pruned.evaluate(grid)))
        assert gap <= 10 * eps + 1e-12
        assert pruned.n <= exact.n


def test_keep_root_matches_keep_all():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=6, mu=0.015)
    U = HFunc([0.0, 1.0, 2.0], [0.0, 1.0, 1.5], 2.0)
    a = solve(spec, U, keep="all").root.value
    b = solve(spec, U, keep="root").root.value
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.vs, b.vs)


def test_thread_count_does_not_change_output():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=8, mu=0.015)
    U = HFunc(np.linspace(0, 4, 9), np.sqrt(np.linspace(0, 4, 9) + 0.1), 2.0)
    base = solve(spec, U, threads=1).root.value
    for threads in (2, 4):
        other = solve(spec, U, threads=threads).root.value
        assert base.xs.tobytes() == other.xs.tobytes()
        assert base.vs.tobytes() == other.vs.tobytes()


def test_value_function_slopes_strictly_decrease_through_sweep():
    spec = crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=5, mu=0.015)
    U = HFunc(np.linspace(0, 4, 5), np.log1p(np.linspace(0, 4, 5)) + 0.1, 2.0)
    surf = solve(spec, U)
    for (m, k), node in surf.items():
        chain = node.value.left_slopes
        assert np.all(np.diff(chain) < 0)
