import numpy as np
import pytest

from rsbgame import (
    ControlPair,
    GameSpec,
    NoConvergence,
    brute_saddle,
    gaussian_J_constant_controls,
    gaussian_moments_constant_controls,
    simulate,
    solve_inner_saddle,
)
from rsbgame.oracle import GaussianMoments, gaussian_J

from helpers import random_model, random_spec, scalar_model


def test_tracking_controls_give_degenerate_law():
    rng = np.random.default_rng(0)
    model = random_model(rng, 2, 2).replace(alpha=0.02, r=0.02, beta=np.zeros(2))
    spec = GameSpec(theta=1.0, horizon_T=1.5, x0=[0.1, 0.2], v0=1.2)
    mom = gaussian_moments_constant_controls(model, spec, ControlPair.zeros(model))
    assert mom.mean_F == pytest.approx(spec.log_f0, abs=1e-14)
    assert mom.var_F == 0.0


def test_uncoupled_moments_by_hand():
    rng = np.random.default_rng(1)
    model = random_model(rng, 2, 1).replace(A=np.zeros((2, 1)), beta=np.zeros(1), r=0.015, alpha=0.035)
    spec = GameSpec(theta=1.0, horizon_T=2.0, x0=[0.4], v0=1.1, l0=0.9)
    h, gam = np.array([0.3, -0.2]), np.array([0.1, 0.0, 0.25])
    mom = gaussian_moments_constant_controls(model, spec, ControlPair(h, gam))
    sh = model.Sigma.T @ h
    drift = 0.015 - 0.035 + h @ (model.a - 0.015) - 0.5 * sh @ sh + 0.5 * gam @ gam
    assert mom.mean_F == pytest.approx(spec.log_f0 + drift * 2.0, abs=1e-12)
    assert mom.var_F == pytest.approx((sh - gam) @ (sh - gam) * 2.0, abs=1e-12)


def test_moments_match_simulated_sample():
    model = scalar_model(a=[0.06], A=[[0.5]], b=[0.02], B=[[-1.0]], Sigma=[[0.2, 0.05]], Lambda=[[0.1, 0.3]], r=0.02, alpha=0.03, beta=[0.2])
    spec = GameSpec(theta=1.0, horizon_T=1.0, x0=[0.1])
    c = ControlPair([0.8], [-0.1, 0.05])
    mom = gaussian_moments_constant_controls(model, spec, c)
    logF = simulate(model, spec, c, 40_000, 100, seed=4).log_F
    n = logF.size
    assert abs(logF.mean() - mom.mean_F) <= 3 * logF.std() / np.sqrt(n) + 1e-4
    se_var = mom.var_F * np.sqrt(2.0 / (n - 1))
    assert abs(logF.var(ddof=1) - mom.var_F) <= 3 * se_var + 1e-4


def test_closed_form_J_examples():
    assert gaussian_J(GaussianMoments(0.3, 0.0, np.zeros(1), np.zeros((2, 2))), 1.7) == 0.3
    assert gaussian_J(GaussianMoments(0.1, 0.04, np.zeros(1), np.zeros((2, 2))), 1.0) == pytest.approx(0.09)
    small = [gaussian_J(GaussianMoments(0.1, 0.04, np.zeros(1), np.zeros((2, 2))), th) for th in (1e-2, 1e-4, 1e-6)]
    assert abs(small[-1] - 0.1) < 1e-7 and abs(small[0] - 0.1) > abs(small[1] - 0.1)


def test_variance_grows_with_horizon():
    rng = np.random.default_rng(2)
    model = random_model(rng, 1, 2).replace(B=np.zeros((2, 2)))
    c = ControlPair([0.5], [0.1, -0.1, 0.2])
    vars_ = [
        gaussian_moments_constant_controls(model, GameSpec(theta=1.0, horizon_T=T, x0=[0.0, 0.0]), c).var_F
        for T in (0.25, 0.5, 1.0, 2.0, 4.0)
    ]
    assert np.all(np.diff(vars_) >= 0) and vars_[0] > 0


def test_J_wrapper_consistent():
    rng = np.random.default_rng(3)
    model = random_model(rng, 1, 1)
    spec = random_spec(rng, model, 1.4)
    c = ControlPair([0.2], [0.0, 0.1])
    mom = gaussian_moments_constant_controls(model, spec, c)
    assert gaussian_J_constant_controls(model, spec, c) == mom.mean_F - 0.35 * mom.var_F


def test_brute_saddle_homogeneous_problem():
    c = brute_saddle(scalar_model(a=[0.01]), 1.0, 0.0, [0.0], [0.0])
    assert np.all(np.abs(c.h) <= 1e-12) and np.all(np.abs(c.gamma) <= 1e-12)


def test_brute_saddle_scalar_agreement():
    model = scalar_model()
    a, b = brute_saddle(model, 1.0, 0.0, [0.0], [0.0]), solve_inner_saddle(model, 1.0, 0.0, [0.0], [0.0])
    assert np.max(np.abs(a.h - b.h)) <= 1e-8 and np.max(np.abs(a.gamma - b.gamma)) <= 1e-8


def test_brute_saddle_near_boundary_reports_no_convergence():
    model = scalar_model()
    try:
        a = brute_saddle(model, 1.9, 0.0, [0.0], [0.3])
    except NoConvergence:
        return
    b = solve_inner_saddle(model, 1.9, 0.0, [0.0], [0.3])
    assert np.max(np.abs(a.h - b.h)) <= 1e-6


def test_brute_saddle_size_limit():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        brute_saddle(random_model(rng, 2, 1), 1.0, 0.0, [0.0], [0.0])
