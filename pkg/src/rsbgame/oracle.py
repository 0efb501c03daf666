"""Independent reference computations used to certify the solver.

Nothing here calls the saddle solver or the value ODE: the Gaussian
moments come from the linear SDE for ``(X, log F)`` under constant
controls, and ``brute_saddle`` works from the running cost ``g`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameSpec, MarketModel, g_value
from .saddle import ControlPair
from .valueode import default_steps

__all__ = [
    "NoConvergence",
    "GaussianMoments",
    "gaussian_moments_constant_controls",
    "gaussian_J",
    "gaussian_J_constant_controls",
    "brute_saddle",
]


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianMoments:
    mean_F: float
    var_F: float
    mean_X: np.ndarray
    cov: np.ndarray  # joint covariance of (X, log F) at T


def gaussian_moments_constant_controls(model: MarketModel, spec: GameSpec, c: ControlPair, n_steps: int | None = None) -> GaussianMoments:
    """Law of ``log F_T`` when ``h`` and ``gamma`` are held constant.

    ``(X, log F)`` is then a linear SDE ``dY = (c(t) + M Y) dt + G dW`` and its
    mean and covariance solve ``m' = c + M m`` and ``P' = M P + P M' + G G'``,
    integrated here with RK4 on the value-ODE grid.
    """
    n = model.n
    h, gamma = c.h, c.gamma
    sh = model.Sigma.T @ h
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = model.B
    M[n, :n] = h @ model.A - model.beta
    G = np.vstack([model.Lambda, (sh - gamma)[None, :]])
    GG = G @ G.T
    const_F = -0.5 * sh @ sh + 0.5 * gamma @ gamma + h @ model.a
    h_sum = np.sum(h)

    def forcing(t):
        rt = model.r(t)
        return np.concatenate([model.b, [rt - h_sum * rt - model.alpha(t) + const_F]])

    def rhs(t, m, P):
        return forcing(t) + M @ m, M @ P + P @ M.T + GG

    T = spec.horizon_T
    N = default_steps(T) if n_steps is None else int(n_steps)
    dt = T / N
    m = np.concatenate([spec.x0, [spec.log_f0]])
    P = np.zeros((n + 1, n + 1))
    for j in range(N):
        t = j * dt
        k1 = rhs(t, m, P)
        k2 = rhs(t + 0.5 * dt, m + 0.5 * dt * k1[0], P + 0.5 * dt * k1[1])
        k3 = rhs(t + 0.5 * dt, m + 0.5 * dt * k2[0], P + 0.5 * dt * k2[1])
        k4 = rhs(t + dt, m + dt * k3[0], P + dt * k3[1])
        m = m + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        P = P + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        P = 0.5 * (P + P.T)
    return GaussianMoments(float(m[n]), float(max(P[n, n], 0.0)), m[:n].copy(), P)


def gaussian_J(moments: GaussianMoments, theta: float) -> float:
    """Exact risk-sensitive criterion of a Gaussian ``log F``: ``mean - (theta/4) var``."""
    return moments.mean_F - 0.25 * theta * moments.var_F


def gaussian_J_constant_controls(model: MarketModel, spec: GameSpec, c: ControlPair, n_steps: int | None = None) -> float:
    return gaussian_J(gaussian_moments_constant_controls(model, spec, c, n_steps), spec.theta)


def _hamiltonian(model, theta, t, x, p, h, gamma):
    vol_gap = h @ model.Sigma - gamma
    return -0.5 * theta * np.sum(vol_gap * (model.Lambda.T @ p), axis=-1) - g_value(model, theta, t, x, h, gamma)


def _axis_grid(dim, radius, step):
    ticks = np.arange(-radius, radius + 0.5 * step, step)
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def brute_saddle(
    model: MarketModel,
    theta: float,
    t: float,
    x,
    p,
    grid_radius: float = 1.0,
    grid_step: float = 0.1,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> ControlPair:
    """Saddle by grid max-min followed by alternating exact best responses.

    The alternation contracts with factor ``theta^2 / (4 - theta^2)`` and
    therefore only converges for ``theta < sqrt(2)``; otherwise
    ``NoConvergence`` is raised. Intended for ``m + (n + m) <= 4``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    m, k = model.m, model.n_noise
    if m + k > 4:
        raise ValueError("brute_saddle is limited to m + (n + m) <= 4")
    hs = _axis_grid(m, grid_radius, grid_step)
    gs = _axis_grid(k, grid_radius, grid_step)
    table = _hamiltonian(model, theta, t, x, p, hs[:, None, :], gs[None, :, :])
    i = int(np.argmax(table.min(axis=1)))
    h, gamma = hs[i].copy(), gs[int(np.argmin(table[i]))].copy()

    half = 0.5 * theta
    SS = model.Sigma @ model.Sigma.T
    d = model.a + model.A @ x - model.r(t)
    lam_p = model.Lambda.T @ p
    for _ in range(max_iter):
        gamma_new = -half / (1.0 - half) * (model.Sigma.T @ h + lam_p)
        h_new = np.linalg.solve((1.0 + half) * SS, d + half * model.Sigma @ gamma_new - half * model.Sigma @ lam_p)
        change = max(np.max(np.abs(h_new - h)), np.max(np.abs(gamma_new - gamma)))
        h, gamma = h_new, gamma_new
        if change <= tol:
            return ControlPair(h, gamma)
        if not np.isfinite(change) or change > 1e12:
            break
    raise NoConvergence(f"alternating best responses did not settle for theta={theta}")
