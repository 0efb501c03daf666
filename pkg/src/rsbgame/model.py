"""Market, benchmark and game parameters, plus the scalar building blocks.

The factor process ``X`` is ``n``-dimensional, there are ``m`` risky assets
and the driving Brownian motion has ``n + m`` components. Everything in this
module broadcasts over leading batch axes of ``x``, ``h`` and ``gamma`` so the
solver and the simulator can evaluate whole path ensembles in one call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScenarioError",
    "DimensionMismatch",
    "RankDeficientSigma",
    "ThetaOutOfRange",
    "NonpositiveInitialState",
    "CorrelationWarning",
    "TimeScalar",
    "MarketModel",
    "GameSpec",
    "ValidationReport",
    "validate",
    "excess_drift",
    "g_value",
]


class ScenarioError(ValueError):
    """Base class for invalid model/spec input. ``field`` names the culprit."""

    code = "ScenarioError"

    def __init__(self, field: str, message: str):
        super().__init__(f"{self.code}: {field}: {message}")
        self.field = field


class DimensionMismatch(ScenarioError):
    code = "DimensionMismatch"


class RankDeficientSigma(ScenarioError):
    code = "RankDeficientSigma"


class ThetaOutOfRange(ScenarioError):
    code = "ThetaOutOfRange"


class NonpositiveInitialState(ScenarioError):
    code = "NonpositiveInitialState"


class CorrelationWarning(UserWarning):
    """Security and factor noise are uncorrelated (Sigma @ Lambda.T == 0)."""


@dataclass(frozen=True)
class TimeScalar:
    """Deterministic scalar function of time.

    Piecewise linear through ``(times[i], values[i])`` and constant outside
    the first/last breakpoint.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise ValueError("TimeScalar needs matching 1-d times/values with at least one breakpoint")
        if np.any(np.diff(times) <= 0):
            raise ValueError("TimeScalar breakpoint times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "TimeScalar":
        return cls(np.array([0.0]), np.array([float(value)]))

    @classmethod
    def coerce(cls, spec) -> "TimeScalar":
        """Build from a number, a ``TimeScalar`` or a list of ``[t, value]`` pairs."""
        if isinstance(spec, TimeScalar):
            return spec
        if np.isscalar(spec):
            return cls.constant(float(spec))
        pairs = np.asarray(spec, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("time-dependent scalar must be a number or a list of [t, value] pairs")
        return cls(pairs[:, 0], pairs[:, 1])

    def __call__(self, t):
        if self.times.size == 1:
            return self.values[0] if np.ndim(t) == 0 else np.full(np.shape(t), self.values[0])
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(t) == 0 else out

    def to_json(self):
        if self.times.size == 1:
            return float(self.values[0])
        return [[float(t), float(v)] for t, v in zip(self.times, self.values)]


def _as_matrix(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def _as_vector(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


@dataclass(frozen=True)
class MarketModel:
    """Constant-coefficient factor model with a controlled benchmark.

    Attributes:
        a: security drift intercept, shape (m,)
        A: factor loading of security drifts, shape (m, n)
        b: factor drift intercept, shape (n,)
        B: factor mean-reversion matrix, shape (n, n)
        Sigma: security volatility, shape (m, n+m)
        Lambda: factor volatility, shape (n, n+m)
        r: risk-free rate as a function of time
        alpha: benchmark drift intercept as a function of time
        beta: benchmark drift loading on the factors, shape (n,)

    Construction only coerces types; call :func:`validate` to check shapes
    and rank.
    """

    a: np.ndarray
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    Sigma: np.ndarray
    Lambda: np.ndarray
    r: TimeScalar
    alpha: TimeScalar
    beta: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "beta"):
            object.__setattr__(self, name, _as_vector(getattr(self, name)))
        for name in ("A", "B", "Sigma", "Lambda"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name)))
        object.__setattr__(self, "r", TimeScalar.coerce(self.r))
        object.__setattr__(self, "alpha", TimeScalar.coerce(self.alpha))

    @property
    def m(self) -> int:
        return self.Sigma.shape[0]

    @property
    def n(self) -> int:
        return self.Lambda.shape[0]

    @property
    def n_noise(self) -> int:
        return self.Sigma.shape[1]

    def replace(self, **changes) -> "MarketModel":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return MarketModel(**fields)


@dataclass(frozen=True)
class GameSpec:
    """Risk aversion, horizon and initial state of one game instance."""

    theta: float
    horizon_T: float
    x0: np.ndarray
    v0: float = 1.0
    l0: float = 1.0
    theta_margin: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "x0", _as_vector(self.x0))
        for name in ("theta", "horizon_T", "v0", "l0", "theta_margin"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def f0(self) -> float:
        """Initial wealth-to-benchmark ratio."""
        return self.v0 / self.l0

    @property
    def log_f0(self) -> float:
        return float(np.log(self.f0))


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_for_errors(self):
        if self.errors:
            raise self.errors[0]

    def lines(self) -> list:
        out = [str(e) for e in self.errors]
        out += [f"warning: {w}" for w in self.warnings]
        return out


def validate(model: MarketModel, spec: GameSpec | None = None, rank_tol: float = 1e-10) -> ValidationReport:
    """Check shapes, the rank of ``Sigma`` and the admissible ``theta`` range.

    Returns a report instead of raising so callers can print every problem
    at once. ``rank_tol`` is relative to the largest singular value.
    """
    report = ValidationReport()
    m, n = model.m, model.n
    k = m + n
    expected = {
        "a": (model.a.shape, (m,)),
        "A": (model.A.shape, (m, n)),
        "b": (model.b.shape, (n,)),
        "B": (model.B.shape, (n, n)),
        "Sigma": (model.Sigma.shape, (m, k)),
        "Lambda": (model.Lambda.shape, (n, k)),
        "beta": (model.beta.shape, (n,)),
    }
    for name, (got, want) in expected.items():
        if got != want:
            report.errors.append(DimensionMismatch(name, f"shape {got}, expected {want} for m={m}, n={n}"))
    if spec is not None and spec.x0.shape != (n,):
        report.errors.append(DimensionMismatch("x0", f"shape {spec.x0.shape}, expected {(n,)}"))

    for name in ("a", "A", "b", "B", "Sigma", "Lambda", "beta"):
        if not np.all(np.isfinite(getattr(model, name))):
            report.errors.append(ScenarioError(name, "non-finite entries"))

    if model.Sigma.shape == (m, k) and np.all(np.isfinite(model.Sigma)):
        sv = np.linalg.svd(model.Sigma, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] <= rank_tol * sv[0]:
            report.errors.append(
                RankDeficientSigma("Sigma", f"smallest singular value {sv[-1]:.3g} vs largest {sv[0]:.3g}")
            )
        elif model.Lambda.shape == (n, k) and not np.any(model.Sigma @ model.Lambda.T):
            report.warnings.append("Sigma @ Lambda.T is identically zero (uncorrelated factor noise)")

    if spec is not None:
        eps = spec.theta_margin
        if not (eps <= spec.theta <= 2.0 - eps):
            report.errors.append(ThetaOutOfRange("theta", f"{spec.theta} not in [{eps}, {2.0 - eps}]"))
        if not spec.horizon_T > 0:
            report.errors.append(NonpositiveInitialState("T", f"horizon must be positive, got {spec.horizon_T}"))
        if not spec.v0 > 0:
            report.errors.append(NonpositiveInitialState("v0", f"initial wealth must be positive, got {spec.v0}"))
        if not spec.l0 > 0:
            report.errors.append(NonpositiveInitialState("l0", f"initial benchmark must be positive, got {spec.l0}"))
    return report


def check(model: MarketModel, spec: GameSpec | None = None) -> None:
    """Raise the first validation error; emit warnings as ``CorrelationWarning``."""
    report = validate(model, spec)
    report.raise_for_errors()
    for w in report.warnings:
        warnings.warn(w, CorrelationWarning, stacklevel=2)


def excess_drift(model: MarketModel, t: float, x) -> np.ndarray:
    """Security drift in excess of the short rate, ``a + A x - r(t) 1``."""
    x = np.asarray(x, dtype=float)
    return model.a + x @ model.A.T - model.r(t)


def g_value(model: MarketModel, theta: float, t: float, x, h, gamma):
    """Running cost of the exponential-of-integral reformulation.

    ``0.5(theta/2+1) h'SS'h - r - h'd + (alpha + beta x) - (theta/2) h'S gamma
    + 0.5(theta/2-1) gamma'gamma`` with ``S = Sigma`` and ``d`` the excess drift.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    half = 0.5 * theta
    sh = h @ model.Sigma  # h' Sigma, shape (..., n+m)
    d = excess_drift(model, t, x)
    return (
        0.5 * (half + 1.0) * np.sum(sh * sh, axis=-1)
        - model.r(t)
        - np.sum(h * d, axis=-1)
        + (model.alpha(t) + x @ model.beta)
        - half * np.sum(sh * gamma, axis=-1)
        + 0.5 * (half - 1.0) * np.sum(gamma * gamma, axis=-1)
    )
