import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsbgame import (
    CorrelationWarning,
    DimensionMismatch,
    GameSpec,
    MarketModel,
    NonpositiveInitialState,
    RankDeficientSigma,
    ThetaOutOfRange,
    TimeScalar,
    excess_drift,
    g_value,
    validate,
)
from rsbgame.model import check

from helpers import random_model, scalar_model


def test_time_scalar_piecewise_linear_with_flat_ends():
    ts = TimeScalar.coerce([[0.0, 0.01], [1.0, 0.03]])
    assert ts(0.5) == pytest.approx(0.02)
    assert ts(-1.0) == 0.01 and ts(5.0) == 0.03
    assert TimeScalar.coerce(0.04)(3.0) == 0.04
    assert TimeScalar.coerce(ts.to_json())(0.25) == ts(0.25)


def test_time_scalar_rejects_unordered_breakpoints():
    with pytest.raises(ValueError):
        TimeScalar.coerce([[1.0, 0.0], [0.5, 0.1]])


def test_scalar_model_is_valid_but_warns_about_zero_correlation():
    report = validate(scalar_model(), GameSpec(theta=1.0, horizon_T=1.0, x0=[0.0]))
    assert report.ok
    assert report.warnings
    with pytest.warns(CorrelationWarning):
        check(scalar_model())


def test_redundant_asset_rejected():
    rng = np.random.default_rng(0)
    model = random_model(rng, 2, 1)
    Sigma = model.Sigma.copy()
    Sigma[1] = Sigma[0]
    report = validate(model.replace(Sigma=Sigma))
    assert isinstance(report.errors[0], RankDeficientSigma)
    assert report.errors[0].field == "Sigma"


@pytest.mark.parametrize("theta", [0.0, 2.0, 2.5, -1.0, 1.9995])
def test_theta_outside_open_interval_rejected(theta):
    report = validate(scalar_model(), GameSpec(theta=theta, horizon_T=1.0, x0=[0.0]))
    assert any(isinstance(e, ThetaOutOfRange) and e.field == "theta" for e in report.errors)


def test_shape_and_positivity_errors_name_the_field():
    model = scalar_model(A=[[0.0, 1.0]])
    spec = GameSpec(theta=1.0, horizon_T=-1.0, x0=[0.0], v0=0.0)
    report = validate(model, spec)
    fields = {e.field for e in report.errors}
    assert {"A", "T", "v0"} <= fields
    assert any(isinstance(e, DimensionMismatch) for e in report.errors)
    assert any(isinstance(e, NonpositiveInitialState) for e in report.errors)
    with pytest.raises(DimensionMismatch):
        report.raise_for_errors()


def test_excess_drift_examples():
    assert excess_drift(scalar_model(a=[0.01]), 0.0, [3.0]) == pytest.approx([0.0])
    assert excess_drift(scalar_model(), 0.0, [0.0]) == pytest.approx([0.04])
    model = MarketModel(
        a=[0.03], A=[[0.1, -0.2]], b=[0, 0], B=np.zeros((2, 2)), Sigma=[[1, 0, 0]], Lambda=[[0, 1, 0], [0, 0, 1]],
        r=0.02, alpha=0.0, beta=[0, 0],
    )
    assert excess_drift(model, 0.0, [1.0, 0.5]) == pytest.approx([0.01], abs=1e-15)


def test_g_value_examples():
    model = scalar_model(beta=[0.3], alpha=0.02)
    x = np.array([0.5])
    base = -0.01 + 0.02 + 0.3 * 0.5
    assert g_value(model, 1.0, 0.0, x, [0.0], [0.0, 0.0]) == pytest.approx(base)
    assert g_value(model, 1.0, 0.0, x, [0.0], [1.0, 0.0]) == pytest.approx(base - 0.25)
    assert g_value(scalar_model(), 1.0, 0.0, [0.0], [1.0], [0.0, 0.0]) == pytest.approx(0.70)


def test_g_value_matches_symbolic_form():
    sympy = pytest.importorskip("sympy")
    h, g1, g2, th = sympy.symbols("h g1 g2 theta")
    # scalar model: Sigma = [1 0], d = 0.04, r = 0.01, alpha = beta = 0
    gam = sympy.Matrix([g1, g2])
    sig = sympy.Matrix([[1, 0]])
    expr = (
        sympy.Rational(1, 2) * (th / 2 + 1) * h**2
        - sympy.Rational(1, 100)
        - h * sympy.Rational(4, 100)
        - th / 2 * h * (sig * gam)[0]
        + sympy.Rational(1, 2) * (th / 2 - 1) * (gam.T * gam)[0]
    )
    vals = {h: 0.7, g1: -0.3, g2: 1.1, th: 1.3}
    got = g_value(scalar_model(), 1.3, 0.0, [0.0], [0.7], [-0.3, 1.1])
    assert got == pytest.approx(float(expr.subs(vals)), abs=1e-14)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, m=st.integers(1, 3), n=st.integers(1, 3))
def test_g_value_is_exactly_quadratic_in_controls(seed, m, n):
    rng = np.random.default_rng(seed)
    model = random_model(rng, m, n)
    x = rng.normal(size=n)
    h, gam = rng.normal(size=m), rng.normal(size=n + m)
    dh, dg = rng.normal(size=m), rng.normal(size=n + m)
    vals = [g_value(model, 1.1, 0.3, x, h + s * dh, gam + s * dg) for s in range(-2, 3)]
    second = np.diff(vals, 2)
    assert np.ptp(second) <= 1e-12 * max(1.0, np.max(np.abs(vals)))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, m=st.integers(1, 3), n=st.integers(1, 3), theta=st.floats(0.05, 1.95))
def test_g_value_consistent_with_ito_exponent(seed, m, n, theta):
    rng = np.random.default_rng(seed)
    model = random_model(rng, m, n)
    t = float(rng.uniform(0, 1))
    x, h, gam = rng.normal(size=n), rng.normal(size=m), rng.normal(size=n + m)
    d = model.a + model.A @ x - model.r(t)
    sh = model.Sigma.T @ h
    drift = model.r(t) + h @ d - (model.alpha(t) + model.beta @ x) - 0.5 * sh @ sh + 0.5 * gam @ gam
    gap = sh - gam
    expected = -0.5 * theta * drift + theta**2 / 8.0 * gap @ gap
    assert 0.5 * theta * g_value(model, theta, t, x, h, gam) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, m=st.integers(1, 3), n=st.integers(1, 3))
def test_excess_drift_is_affine(seed, m, n):
    rng = np.random.default_rng(seed)
    model = random_model(rng, m, n)
    x1, x2 = rng.normal(size=n), rng.normal(size=n)
    lhs = excess_drift(model, 0.2, x1 + x2) - excess_drift(model, 0.2, x2)
    np.testing.assert_allclose(lhs, model.A @ x1, rtol=0, atol=1e-15)


def test_batched_evaluation_matches_pointwise():
    rng = np.random.default_rng(3)
    model = random_model(rng, 2, 2)
    X, H, G = rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), rng.normal(size=(5, 4))
    batch = g_value(model, 0.7, 0.1, X, H, G)
    single = [g_value(model, 0.7, 0.1, X[i], H[i], G[i]) for i in range(5)]
    np.testing.assert_allclose(batch, single, rtol=1e-14)
