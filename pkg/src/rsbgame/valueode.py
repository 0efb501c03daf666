"""Quadratic value function ``u(t, x) = 0.5 x'Q_t x + q_t'x + k_t`` by backward RK4.

The right-hand side is not written out symbolically. At each stage the
optimized spatial part ``S(x)`` of the generator (everything except
``du/dt``) is evaluated at the saddle controls on a small stencil of
points; since ``S`` is exactly quadratic in ``x`` its coefficients follow
from those values, and ``du/dt = -S`` fixes ``dQ/dt``, ``dq/dt``, ``dk/dt``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .model import GameSpec, MarketModel, excess_drift, g_value
from .saddle import solve_saddle_batch

__all__ = [
    "TimeOutOfRange",
    "NonFiniteCoefficients",
    "ValueCoefficients",
    "optimized_spatial_part",
    "stage_rhs",
    "solve_backward",
    "value_and_gradient",
    "paper_coefficients_compare",
    "default_steps",
]

STEPS_PER_UNIT = 400


class TimeOutOfRange(ValueError):
    pass


class NonFiniteCoefficients(ArithmeticError):
    pass


@dataclass(frozen=True)
class ValueCoefficients:
    """Node values of ``Q``, ``q``, ``k`` on an ascending grid covering ``[0, T]``."""

    grid: np.ndarray
    Q: np.ndarray
    q: np.ndarray
    k: np.ndarray
    model: MarketModel
    theta: float

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def _locate(self, t: float):
        t = float(t)
        lo, hi = self.grid[0], self.grid[-1]
        slack = 1e-12 * max(1.0, abs(hi))
        if not (lo - slack <= t <= hi + slack):
            raise TimeOutOfRange(f"t={t} outside [{lo}, {hi}]")
        t = min(max(t, lo), hi)
        i = int(np.searchsorted(self.grid, t, side="right")) - 1
        i = min(max(i, 0), len(self.grid) - 2)
        w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i])
        return i, w

    def at(self, t: float):
        """Linearly interpolated ``(Q_t, q_t, k_t)``."""
        i, w = self._locate(t)
        if w == 0.0:
            return self.Q[i], self.q[i], float(self.k[i])
        if w == 1.0:
            return self.Q[i + 1], self.q[i + 1], float(self.k[i + 1])
        Q = (1.0 - w) * self.Q[i] + w * self.Q[i + 1]
        q = (1.0 - w) * self.q[i] + w * self.q[i + 1]
        k = (1.0 - w) * self.k[i] + w * self.k[i + 1]
        return Q, q, float(k)

    def value(self, t: float, x) -> float:
        Q, q, k = self.at(t)
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, Q, x) + x @ q + k

    def with_Q_scaled(self, factor: float) -> "ValueCoefficients":
        return ValueCoefficients(self.grid, self.Q * factor, self.q, self.k, self.model, self.theta)

    def to_csv(self, path) -> None:
        """One row per node: ``t``, ``Q`` row-major, ``q``, ``k``; 17 significant digits."""
        n = self.q.shape[1]
        header = ["t"] + [f"Q_{i}_{j}" for i in range(n) for j in range(n)] + [f"q_{i}" for i in range(n)] + ["k"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for j, t in enumerate(self.grid):
                row = [t, *self.Q[j].ravel(), *self.q[j], self.k[j]]
                writer.writerow([format(float(v), ".17g") for v in row])

    @classmethod
    def from_csv(cls, path, model: MarketModel, theta: float) -> "ValueCoefficients":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = model.n
        if data.shape[1] != 1 + n * n + n + 1:
            raise ValueError(f"{path}: expected {2 + n * n + n} columns for n={n}, got {data.shape[1]}")
        grid = data[:, 0]
        Q = data[:, 1 : 1 + n * n].reshape(-1, n, n)
        q = data[:, 1 + n * n : 1 + n * n + n]
        k = data[:, -1]
        return cls(grid, Q, q, k, model, float(theta))


def default_steps(horizon_T: float) -> int:
    return max(1, math.ceil(STEPS_PER_UNIT * horizon_T - 1e-9))


def optimized_spatial_part(model: MarketModel, theta: float, t: float, Q, q, xs) -> np.ndarray:
    """``S(x)``: the generator at the saddle controls with the ``du/dt`` term removed.

    ``xs`` has shape (k, n); returns shape (k,).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    p = xs @ Q + q
    h, gamma = solve_saddle_batch(model, theta, t, xs, p)
    lam_p = p @ model.Lambda
    drift = model.b + xs @ model.B.T - 0.5 * theta * (h @ model.Sigma - gamma) @ model.Lambda.T
    return (
        np.sum(drift * p, axis=1)
        + 0.5 * np.trace(model.Lambda @ model.Lambda.T @ Q)
        - 0.25 * theta * np.sum(lam_p * lam_p, axis=1)
        - g_value(model, theta, t, xs, h, gamma)
    )


def _stencil(n: int) -> np.ndarray:
    eye = np.eye(n)
    pairs = [eye[i] + eye[j] for i in range(n) for j in range(i + 1, n)]
    return np.vstack([np.zeros((1, n)), eye, -eye] + ([np.array(pairs)] if pairs else []))


def stage_rhs(model: MarketModel, theta: float, t: float, Q, q, k=0.0):
    """Time derivatives ``(dQ/dt, dq/dt, dk/dt)`` making the optimized generator vanish.

    ``k`` does not enter (the generator depends on ``u`` only through its
    derivatives); it is accepted so callers can pass a full state.
    """
    n = model.n
    s = optimized_spatial_part(model, theta, t, Q, q, _stencil(n))
    s0, s_pos, s_neg = s[0], s[1 : n + 1], s[n + 1 : 2 * n + 1]
    quad = np.diag(s_pos + s_neg - 2.0 * s0)
    lin = 0.5 * (s_pos - s_neg)
    idx = 2 * n + 1
    for i in range(n):
        for j in range(i + 1, n):
            quad[i, j] = quad[j, i] = s[idx] - s_pos[i] - s_pos[j] + s0
            idx += 1
    return -quad, -lin, -float(s0)


def solve_backward(model: MarketModel, spec: GameSpec, n_steps: int | None = None) -> ValueCoefficients:
    """Integrate the coefficient ODEs from ``T`` down to 0 with fixed-step RK4.

    Terminal data ``Q_T = 0``, ``q_T = 0``, ``k_T = log f``. Raises
    ``NonFiniteCoefficients`` on blow-up; ``SingularSaddleSystem`` propagates.
    """
    T = spec.horizon_T
    N = default_steps(T) if n_steps is None else int(n_steps)
    if N < 1:
        raise ValueError("n_steps must be >= 1")
    n, theta = model.n, spec.theta
    grid = np.linspace(0.0, T, N + 1)
    Qs = np.zeros((N + 1, n, n))
    qs = np.zeros((N + 1, n))
    ks = np.zeros(N + 1)
    ks[N] = spec.log_f0

    def rhs(t, Q, q):
        Q = 0.5 * (Q + Q.T)
        dQ, dq, dk = stage_rhs(model, theta, t, Q, q)
        return 0.5 * (dQ + dQ.T), dq, dk

    Q, q, k = Qs[N].copy(), qs[N].copy(), ks[N]
    with np.errstate(over="ignore", invalid="ignore"):
        _integrate(rhs, grid, Qs, qs, ks, Q, q, k)
    return ValueCoefficients(grid, Qs, qs, ks, model, float(theta))


def _integrate(rhs, grid, Qs, qs, ks, Q, q, k):
    N = len(grid) - 1
    for j in range(N, 0, -1):
        t, dt = grid[j], grid[j] - grid[j - 1]
        k1 = rhs(t, Q, q)
        k2 = rhs(t - 0.5 * dt, Q - 0.5 * dt * k1[0], q - 0.5 * dt * k1[1])
        k3 = rhs(t - 0.5 * dt, Q - 0.5 * dt * k2[0], q - 0.5 * dt * k2[1])
        k4 = rhs(grid[j - 1], Q - dt * k3[0], q - dt * k3[1])
        Q = Q - dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        q = q - dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        k = k - dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        Q = 0.5 * (Q + Q.T)
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(q)) and np.isfinite(k)):
            raise NonFiniteCoefficients(f"coefficients blew up near t={grid[j - 1]:.6g}")
        Qs[j - 1], qs[j - 1], ks[j - 1] = Q, q, k


def value_and_gradient(coeffs: ValueCoefficients, t: float, x):
    """``(u, Du, D2u)`` at ``(t, x)``."""
    Q, q, k = coeffs.at(t)
    x = np.asarray(x, dtype=float)
    grad = Q @ x + q
    return float(0.5 * x @ Q @ x + q @ x + k), grad, Q.copy()


def paper_coefficients_compare(model: MarketModel, theta: float, t: float = 0.0, Q=None, q=None, k: float = 0.0, seed: int = 0) -> dict:
    """Compare the extracted RHS against the closed-form coefficient ODEs.

    The closed-form system is read as ``dQ/dt + [...] = 0`` etc., with
    ``(Sigma Sigma^{-1})^{-1}`` taken as ``(Sigma Sigma')^{-1}`` and the row
    vector ``(a - r 1)^{-1}`` taken as ``(a - r 1)'``. Diagnostic only; nothing
    here feeds the solver. When ``Q``/``q`` are omitted a random symmetric
    sample is drawn from ``seed``.
    """
    n = model.n
    rng = np.random.default_rng(seed)
    if Q is None:
        G = rng.normal(scale=0.3, size=(n, n))
        Q = 0.5 * (G + G.T)
    if q is None:
        q = rng.normal(scale=0.3, size=n)
    Q = np.asarray(Q, dtype=float)
    q = np.asarray(q, dtype=float)

    S, L, A = model.Sigma, model.Lambda, model.A
    SSi = np.linalg.inv(S @ S.T)
    c = (2.0 - theta**2) ** 2
    d0 = model.a - model.r(t)
    K0 = -(theta**2) / (2.0 * (2.0 - theta)) * L @ L.T + 2.0 * theta**2 / ((2.0 - theta) * c) * L @ S.T @ SSi @ S @ L.T
    K1 = model.B - 2.0 * theta / c * A.T @ SSi @ S @ L.T

    closed_dQ = -(Q @ K0 @ Q + K1.T @ Q + Q @ K1 + 2.0 * (2.0 - theta) / c * A.T @ SSi @ A)
    row = d0 @ SSi @ (-2.0 * theta / c * S @ L.T @ Q + (2.0 - theta) / c * A)
    closed_dq = -((K1.T + Q @ K0) @ q + Q.T @ model.b + row - model.beta)
    trace_term = 0.5 * np.trace(L @ L.T @ Q)
    closed_dk = -(
        trace_term
        + model.r(t)
        - model.alpha(t)
        - 2.0 * theta / c * d0 @ SSi @ S @ L.T @ q
        + (2.0 - theta) / c * d0 @ SSi @ d0
        + theta**2 / ((2.0 - theta) * c) * q @ L @ S.T @ SSi @ S @ L.T @ q
        - theta**2 / (4.0 * (2.0 - theta)) * q @ L @ L.T @ q
    )

    dQ, dq, dk = stage_rhs(model, theta, t, Q, q, k)
    # At x = 0 the gradient is q, so Q reaches S(0) only through the trace term.
    _, _, dk_noQ = stage_rhs(model, theta, t, np.zeros_like(Q), q, k)
    extracted_trace = -(dk - dk_noQ)
    return {
        "t": float(t),
        "theta": float(theta),
        "dQ": {"extracted": dQ, "closed_form": closed_dQ, "max_abs_delta": float(np.max(np.abs(dQ - closed_dQ)))},
        "dq": {"extracted": dq, "closed_form": closed_dq, "max_abs_delta": float(np.max(np.abs(dq - closed_dq)))},
        "dk": {"extracted": dk, "closed_form": float(closed_dk), "abs_delta": float(abs(dk - closed_dk))},
        "trace_term": {"extracted": float(extracted_trace), "closed_form": float(trace_term), "abs_delta": float(abs(extracted_trace - trace_term))},
        "K0": K0,
        "K1": K1,
    }
