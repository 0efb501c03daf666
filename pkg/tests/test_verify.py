import json

import numpy as np
import pytest

from rsbgame import (
    ControlPair,
    GameSpec,
    GridSpec,
    apply_generator,
    fd_consistency_check,
    feedback_strategy,
    g_value,
    isaacs_sign_check,
    solve_backward,
    stage_rhs,
)
from rsbgame.verify import verification_grid

from helpers import random_model, random_spec, zero_model


@pytest.fixture(scope="module")
def solved():
    rng = np.random.default_rng(9)
    model = random_model(rng, 2, 2, r=[[0.0, 0.01], [1.0, 0.03]])
    spec = random_spec(rng, model, 1.5)
    return model, spec, solve_backward(model, spec)


def _generator_other_order(coeffs, t, x, h, gamma):
    """Generator assembled term by term from the definition, without shared helpers."""
    model, theta = coeffs.model, coeffs.theta
    Q, q, k = coeffs.at(t)
    dQ, dq, dk = stage_rhs(model, theta, t, Q, q, k)
    p = q + Q @ x
    LL = model.Lambda @ model.Lambda.T
    drift = model.b + model.B @ x - (theta / 2) * model.Lambda @ (model.Sigma.T @ h - gamma)
    total = dk + x @ dq + 0.5 * (x @ (dQ @ x))
    total += p @ drift
    total += 0.5 * np.sum(LL * Q)
    total -= (theta / 4) * p @ (LL @ p)
    return total - g_value(model, theta, t, x, h, gamma)


def test_generator_vanishes_at_saddle(solved):
    model, spec, coeffs = solved
    fb = feedback_strategy(coeffs)
    rng = np.random.default_rng(0)
    for t in (0.0, 0.3, 0.77, 1.0):
        for x in rng.normal(size=(5, 2)):
            assert abs(apply_generator(coeffs, t, x, fb(t, x))) <= 1e-12 * (1 + x @ x)


def test_zero_model_zero_controls():
    model = zero_model(2, 1)
    coeffs = solve_backward(model, GameSpec(theta=1.0, horizon_T=1.0, x0=[0.0]), 20)
    for x in ([0.0], [1.0], [-4.0]):
        assert apply_generator(coeffs, 0.5, x, ControlPair.zeros(model)) == 0.0


def test_generator_matches_independent_assembly(solved):
    model, _, coeffs = solved
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = float(rng.uniform(0, 1))
        x, h, gam = rng.normal(size=2), rng.normal(size=2), rng.normal(size=4)
        a = apply_generator(coeffs, t, x, h=h, gamma=gam)
        b = _generator_other_order(coeffs, t, x, h, gam)
        assert a == pytest.approx(b, abs=1e-8)


def test_generator_quadratic_in_state_for_affine_controls(solved):
    model, _, coeffs = solved
    rng = np.random.default_rng(2)
    fb = feedback_strategy(coeffs)
    x0, v = rng.normal(size=2), rng.normal(size=2)
    H1, G1 = rng.normal(size=(2, 2)), rng.normal(size=(4, 2))
    vals = []
    for s in range(-2, 3):
        x = x0 + s * v
        c = fb(0.4, x)
        vals.append(apply_generator(coeffs, 0.4, x, h=c.h + H1 @ x, gamma=c.gamma + G1 @ x))
    second = np.diff(vals, 2)
    assert np.ptp(second) <= 1e-9


def test_sign_check_passes_on_solved_scenario(solved):
    model, spec, coeffs = solved
    rep = isaacs_sign_check(coeffs, n_perturb=200, seed=3, x0=spec.x0, log_f=spec.log_f0)
    assert rep.passed
    assert rep.worst_h_violation <= rep.tol and rep.worst_gamma_violation >= -rep.tol
    assert rep.n_points == 9 * (1 + 2 * 2 + 20)
    assert rep.n_perturbations == 2 * 200 * rep.n_points
    assert json.loads(json.dumps(rep.to_dict()))["passed"] is True


def test_zero_perturbation_reproduces_residual(solved):
    _, _, coeffs = solved
    fb = feedback_strategy(coeffs)
    x = np.array([0.4, -0.3])
    c = fb(0.25, x)
    base = apply_generator(coeffs, 0.25, x, c)
    stacked = apply_generator(coeffs, 0.25, x, h=np.stack([c.h, c.h]), gamma=np.stack([c.gamma, c.gamma]))
    np.testing.assert_allclose(stacked, base, rtol=0, atol=1e-15)


def test_investor_deviation_is_downward_parabola(solved):
    model, _, coeffs = solved
    fb = feedback_strategy(coeffs)
    rng = np.random.default_rng(4)
    s = np.linspace(-1, 1, 9)
    for _ in range(20):
        t, x = float(rng.uniform(0, 1)), rng.normal(size=2)
        c = fb(t, x)
        dh = rng.normal(size=2)
        vals = apply_generator(coeffs, t, x, h=c.h + s[:, None] * dh, gamma=np.broadcast_to(c.gamma, (9, 4)))
        assert np.polyfit(s, vals, 2)[0] < 0


def test_sign_check_detects_wrong_coefficients(solved):
    _, spec, coeffs = solved
    rep = isaacs_sign_check(coeffs.with_Q_scaled(1.1), n_perturb=50, seed=0)
    assert rep.max_saddle_residual <= 1e-6  # du/dt comes from the same RHS, see the fd check
    fd = fd_consistency_check(coeffs.with_Q_scaled(1.1))
    assert not fd.passed


def test_terminal_error_reported():
    model = zero_model()
    coeffs = solve_backward(model, GameSpec(theta=1.0, horizon_T=1.0, x0=[0.0], v0=2.0), 10)
    rep = isaacs_sign_check(coeffs, n_perturb=5, log_f=0.0)
    assert rep.terminal_error == pytest.approx(np.log(2.0))
    assert not rep.passed


def test_grid_contains_origin_and_axis_points(solved):
    _, spec, coeffs = solved
    times, states = verification_grid(coeffs, GridSpec(n_times=4, n_random=3, scale=(0.5, 2.0)), np.random.default_rng(0))
    np.testing.assert_array_equal(times, np.linspace(0, 1, 4))
    np.testing.assert_array_equal(states[0], [0, 0])
    np.testing.assert_array_equal(states[1:5], [[0.5, 0], [0, 2.0], [-0.5, 0], [0, -2.0]])


def test_fd_check_passes_and_origin_is_exact(solved):
    _, _, coeffs = solved
    rep = fd_consistency_check(coeffs, n_points=100, seed=5)
    assert rep.passed and rep.n_points == 100
    at_origin = fd_consistency_check(coeffs, n_points=1, x_scale=0.0)
    assert at_origin.max_grad_rel_err <= 1e-10


def test_fd_check_handles_horizon_endpoint():
    rng = np.random.default_rng(6)
    model = random_model(rng, 1, 1)
    coeffs = solve_backward(model, random_spec(rng, model, 1.0), 50)
    rep = fd_consistency_check(coeffs, n_points=2, seed=0)  # exactly the two endpoints
    assert rep.passed
