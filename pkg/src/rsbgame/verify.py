"""Numerical certificates for a solved value function.

Three checks:

* the generator vanishes at the saddle feedback (HJBI residual),
* unilateral deviations move it the right way (investor deviations make it
  non-positive, market deviations non-negative),
* spatial and temporal derivatives agree with finite differences of the
  stored coefficients.

The first two treat ``du/dt`` as given by the ODE right-hand side at the
interpolated coefficients, so they isolate saddle/extraction errors. The
third is what ties the stored coefficients to the ODE.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import g_value
from .saddle import ControlPair, solve_saddle_batch
from .valueode import ValueCoefficients, stage_rhs

__all__ = [
    "GridSpec",
    "VerificationReport",
    "FDReport",
    "apply_generator",
    "verification_grid",
    "isaacs_sign_check",
    "fd_consistency_check",
    "PERTURBATION_MAGNITUDES",
]

PERTURBATION_MAGNITUDES = (0.01, 0.1, 1.0, 10.0)


def _time_derivative(coeffs: ValueCoefficients, t: float, x: np.ndarray) -> float:
    Q, q, k = coeffs.at(t)
    dQ, dq, dk = stage_rhs(coeffs.model, coeffs.theta, t, Q, q, k)
    return float(0.5 * x @ dQ @ x + dq @ x + dk)


def _control_free_part(coeffs: ValueCoefficients, t: float, x: np.ndarray):
    model = coeffs.model
    Q, q, _ = coeffs.at(t)
    p = Q @ x + q
    lam_p = model.Lambda.T @ p
    base = (
        _time_derivative(coeffs, t, x)
        + (model.b + model.B @ x) @ p
        + 0.5 * np.trace(model.Lambda @ model.Lambda.T @ Q)
        - 0.25 * coeffs.theta * lam_p @ lam_p
    )
    return base, p


def apply_generator(coeffs: ValueCoefficients, t: float, x, c: ControlPair | None = None, *, h=None, gamma=None):
    """The generator applied to ``u`` at ``(t, x)`` under controls ``(h, gamma)``.

    ``h``/``gamma`` may be stacks of shape (P, m) / (P, n+m), in which case an
    array of P values is returned.
    """
    if c is not None:
        h, gamma = c.h, c.gamma
    model, theta = coeffs.model, coeffs.theta
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    base, p = _control_free_part(coeffs, t, x)
    vol_gap = h @ model.Sigma - gamma
    controlled = -0.5 * theta * vol_gap @ (model.Lambda.T @ p) - g_value(model, theta, t, x, h, gamma)
    out = base + controlled
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Verification points: ``n_times`` equispaced times times a set of states.

    States are the origin, ``+-scale_i e_i`` and ``n_random`` Gaussian draws
    with per-axis standard deviation ``scale``. ``scale=None`` uses
    ``|x0| + sqrt(diag(Lambda Lambda') T)`` (floored at 0.1).
    """

    n_times: int = 9
    n_random: int = 20
    scale: tuple | None = None


def verification_grid(coeffs: ValueCoefficients, grid: GridSpec, rng: np.random.Generator, x0=None):
    model = coeffs.model
    n, T = model.n, coeffs.horizon
    if grid.scale is None:
        spread = np.sqrt(np.diag(model.Lambda @ model.Lambda.T) * T)
        scale = spread + (np.abs(x0) if x0 is not None else 0.0)
        scale = np.maximum(scale, 0.1)
    else:
        scale = np.broadcast_to(np.asarray(grid.scale, dtype=float), (n,))
    axis = np.diag(scale)
    states = np.vstack([np.zeros((1, n)), axis, -axis, rng.normal(size=(grid.n_random, n)) * scale])
    times = np.linspace(0.0, T, grid.n_times)
    return times, states


@dataclass
class VerificationReport:
    """Outcome of :func:`isaacs_sign_check`.

    ``max_saddle_residual`` is normalized by ``1 + |x|^2``; the two
    violation fields are raw generator values (most positive under investor
    deviations, most negative under market deviations).
    """

    max_saddle_residual: float
    worst_h_violation: float
    worst_gamma_violation: float
    terminal_error: float
    n_points: int
    n_perturbations: int
    seed: int
    tol_res: float

    @property
    def tol(self) -> float:
        return 10.0 * self.tol_res

    @property
    def passed(self) -> bool:
        return (
            self.max_saddle_residual <= self.tol_res
            and self.worst_h_violation <= self.tol
            and self.worst_gamma_violation >= -self.tol
            and self.terminal_error <= self.tol_res
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _unit_directions(rng, count, dim):
    d = rng.normal(size=(count, dim))
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    mags = np.resize(np.asarray(PERTURBATION_MAGNITUDES), count)[:, None]
    return d / norms * mags


def isaacs_sign_check(
    coeffs: ValueCoefficients,
    grid: GridSpec | None = None,
    n_perturb: int = 500,
    seed: int = 0,
    tol_res: float = 1e-6,
    x0=None,
    log_f: float | None = None,
) -> VerificationReport:
    """Residual and deviation signs of the generator over a (t, x) grid.

    At every grid point ``n_perturb`` random deviations of each player are
    drawn (isotropic directions, magnitudes cycling through
    ``PERTURBATION_MAGNITUDES``). Terminal data ``Q_T = 0``, ``q_T = 0`` (and
    ``k_T = log_f`` when given) is checked too.
    """
    grid = grid or GridSpec()
    rng = np.random.default_rng(seed)
    model, theta = coeffs.model, coeffs.theta
    times, states = verification_grid(coeffs, grid, rng, x0)
    worst_res, worst_h, worst_g = 0.0, -np.inf, np.inf
    for t in times:
        Q, q, _ = coeffs.at(t)
        h_hat, g_hat = solve_saddle_batch(model, theta, t, states, states @ Q + q)
        for x, h0, g0 in zip(states, h_hat, g_hat):
            at_saddle = apply_generator(coeffs, t, x, h=h0, gamma=g0)
            worst_res = max(worst_res, abs(at_saddle) / (1.0 + x @ x))
            dh = _unit_directions(rng, n_perturb, model.m)
            dg = _unit_directions(rng, n_perturb, model.n_noise)
            vals_h = apply_generator(coeffs, t, x, h=h0 + dh, gamma=np.broadcast_to(g0, dg.shape))
            vals_g = apply_generator(coeffs, t, x, h=np.broadcast_to(h0, dh.shape), gamma=g0 + dg)
            worst_h = max(worst_h, float(vals_h.max()), at_saddle)
            worst_g = min(worst_g, float(vals_g.min()), at_saddle)

    QT, qT, kT = coeffs.at(coeffs.horizon)
    terminal = float(max(np.max(np.abs(QT), initial=0.0), np.max(np.abs(qT), initial=0.0)))
    if log_f is not None:
        terminal = max(terminal, abs(kT - log_f))
    return VerificationReport(
        max_saddle_residual=float(worst_res),
        worst_h_violation=float(worst_h),
        worst_gamma_violation=float(worst_g),
        terminal_error=terminal,
        n_points=int(len(times) * len(states)),
        n_perturbations=int(2 * n_perturb * len(times) * len(states)),
        seed=int(seed),
        tol_res=float(tol_res),
    )


@dataclass
class FDReport:
    max_grad_rel_err: float
    max_time_rel_err: float
    n_points: int
    seed: int
    grad_rtol: float
    time_rtol: float

    @property
    def passed(self) -> bool:
        return (
            self.max_grad_rel_err <= self.grad_rtol
            and self.max_time_rel_err <= self.time_rtol
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _node_time_derivative(coeffs: ValueCoefficients, j: int, x: np.ndarray) -> float:
    """Second-order finite difference of ``u(., x)`` at node ``j``."""
    grid = coeffs.grid
    u = lambda i: coeffs.value(grid[i], x)  # noqa: E731
    N = len(grid) - 1
    if N == 1:
        return (u(1) - u(0)) / (grid[1] - grid[0])
    if 0 < j < N:
        return (u(j + 1) - u(j - 1)) / (grid[j + 1] - grid[j - 1])
    if j == 0:
        return (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (grid[2] - grid[0])
    return (3.0 * u(N) - 4.0 * u(N - 1) + u(N - 2)) / (grid[N] - grid[N - 2])


def _rel(a, b, scale, floor=1e-12):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(scale, floor))


def fd_consistency_check(
    coeffs: ValueCoefficients,
    n_points: int = 100,
    seed: int = 0,
    grad_rtol: float = 1e-6,
    time_rtol: float = 1e-4,
    x_scale: float = 1.0,
) -> FDReport:
    """Finite-difference cross-checks of ``Du`` and ``du/dt``.

    Times are grid nodes (both endpoints always included) so the temporal
    difference is second-order accurate. Errors are relative to the size of
    the individual terms, e.g. ``|x|^2 |dQ|/2 + |x| |dq| + |dk|`` for
    ``du/dt``, so that cancellation at particular ``x`` does not inflate them.
    """
    rng = np.random.default_rng(seed)
    model = coeffs.model
    n, N = model.n, len(coeffs.grid) - 1
    nodes = np.concatenate([[0, N], rng.integers(0, N + 1, size=max(n_points - 2, 0))])[:n_points]
    xs = rng.normal(scale=x_scale, size=(len(nodes), n))
    xs[0] = 0.0
    eye = np.eye(n)
    grad_err = time_err = 0.0
    for j, x in zip(nodes, xs):
        t = coeffs.grid[j]
        Q, q, k = coeffs.at(t)
        du = Q @ x + q
        step = 1e-3 * (1.0 + np.linalg.norm(x))
        up = np.array([coeffs.value(t, x + step * e) for e in eye])
        dn = np.array([coeffs.value(t, x - step * e) for e in eye])
        fd_grad = (up - dn) / (2.0 * step)
        grad_scale = np.linalg.norm(Q, 2) * np.linalg.norm(x) + np.linalg.norm(q)
        grad_err = max(grad_err, _rel(fd_grad, du, max(np.linalg.norm(du), grad_scale)))
        dQ, dq, dk = stage_rhs(model, coeffs.theta, t, Q, q, k)
        analytic = 0.5 * x @ dQ @ x + dq @ x + dk
        fd_t = _node_time_derivative(coeffs, j, x)
        t_scale = 0.5 * (x @ x) * np.linalg.norm(dQ, 2) + np.linalg.norm(x) * np.linalg.norm(dq) + abs(dk)
        time_err = max(time_err, _rel(fd_t, analytic, max(abs(analytic), t_scale)))
    return FDReport(
        max_grad_rel_err=grad_err,
        max_time_rel_err=time_err,
        n_points=int(len(nodes)),
        seed=int(seed),
        grad_rtol=float(grad_rtol),
        time_rtol=float(time_rtol),
    )
