"""Pointwise saddle of the optimized generator and the induced feedback laws.

For fixed ``(t, x)`` and value gradient ``p`` the control-dependent part of
the generator is

    H(h, gamma) = -(theta/2) (Sigma' h - gamma)' Lambda' p - g(x, h, gamma)

which is strictly concave in ``h`` and strictly convex in ``gamma`` whenever
``0 < theta < 2``. Its unique saddle solves one linear system

    [ -(1+theta/2) SS'   (theta/2) Sigma  ] [h    ]     [ d - (theta/2) Sigma Lambda' p ]
    [ (theta/2) Sigma'   (1-theta/2) I    ] [gamma] = - [ (theta/2) Lambda' p           ]

Eliminating ``h`` gives ``gamma = -theta/(2-theta) (Sigma' h + Lambda' p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MarketModel, excess_drift, g_value

__all__ = [
    "SingularSaddleSystem",
    "ControlPair",
    "FeedbackStrategy",
    "PerturbedStrategy",
    "hamiltonian_hessian",
    "reduced_hamiltonian",
    "solve_inner_saddle",
    "solve_saddle_batch",
    "best_response_h",
    "best_response_gamma",
    "feedback_strategy",
]

_COND_LIMIT = 1e12


class SingularSaddleSystem(np.linalg.LinAlgError):
    """The joint stationarity system is numerically singular."""


@dataclass(frozen=True)
class ControlPair:
    """Investor weights ``h`` (length m) and benchmark volatility ``gamma`` (length n+m).

    Also usable as a constant strategy in the simulator.
    """

    h: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", np.atleast_1d(np.asarray(self.h, dtype=float)))
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.gamma))):
            raise ValueError("ControlPair entries must be finite")

    @classmethod
    def zeros(cls, model: MarketModel) -> "ControlPair":
        return cls(np.zeros(model.m), np.zeros(model.n_noise))

    @property
    def h0(self) -> float:
        """Weight in the riskless bond."""
        return 1.0 - float(np.sum(self.h))

    def evaluate(self, t, X):
        k = X.shape[0]
        return np.broadcast_to(self.h, (k, self.h.size)), np.broadcast_to(self.gamma, (k, self.gamma.size))


def hamiltonian_hessian(model: MarketModel, theta: float) -> np.ndarray:
    """Hessian of ``H`` in the stacked variable ``(h, gamma)``; constant in t, x, p."""
    m, k = model.m, model.n_noise
    half = 0.5 * theta
    hess = np.empty((m + k, m + k))
    hess[:m, :m] = -(1.0 + half) * (model.Sigma @ model.Sigma.T)
    hess[:m, m:] = half * model.Sigma
    hess[m:, :m] = half * model.Sigma.T
    hess[m:, m:] = (1.0 - half) * np.eye(k)
    return hess


def reduced_hamiltonian(model: MarketModel, theta: float, t: float, x, p, c: ControlPair | None = None, *, h=None, gamma=None):
    """Control-dependent part of the generator, evaluated directly from ``g``.

    Pass either a ``ControlPair`` or ``h=``/``gamma=`` arrays (which may carry
    leading batch axes).
    """
    if c is not None:
        h, gamma = c.h, c.gamma
    h = np.asarray(h, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    p = np.asarray(p, dtype=float)
    vol_gap = h @ model.Sigma - gamma  # (Sigma' h - gamma)'
    return -0.5 * theta * np.sum(vol_gap * (p @ model.Lambda), axis=-1) - g_value(model, theta, t, x, h, gamma)


def solve_saddle_batch(model: MarketModel, theta: float, t: float, x, p):
    """Saddle controls for a batch of states ``x`` (k, n) and gradients ``p`` (k, n).

    Returns ``(h, gamma)`` with shapes (k, m) and (k, n+m). The Hessian is
    factored once per call.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    m = model.m
    half = 0.5 * theta
    hess = hamiltonian_hessian(model, theta)
    if not np.all(np.isfinite(hess)) or np.linalg.cond(hess) > _COND_LIMIT:
        raise SingularSaddleSystem(f"saddle system singular for theta={theta} (cond > {_COND_LIMIT:g})")
    lam_p = p @ model.Lambda  # (Lambda' p)', shape (k, n+m)
    lin = np.empty((x.shape[0], hess.shape[0]))
    lin[:, :m] = excess_drift(model, t, x) - half * lam_p @ model.Sigma.T
    lin[:, m:] = half * lam_p
    z = np.linalg.solve(hess, -lin.T).T
    return z[:, :m], z[:, m:]


def solve_inner_saddle(model: MarketModel, theta: float, t: float, x, p) -> ControlPair:
    """Unique saddle ``(h_hat, gamma_hat)`` of :func:`reduced_hamiltonian` at one point.

    ``h_hat`` maximizes ``H(., gamma_hat)`` and ``gamma_hat`` minimizes
    ``H(h_hat, .)``. Raises ``SingularSaddleSystem`` when theta is too close
    to 2 or Sigma is degenerate.
    """
    h, gamma = solve_saddle_batch(model, theta, t, np.asarray(x, dtype=float)[None, :], np.asarray(p, dtype=float)[None, :])
    return ControlPair(h[0], gamma[0])


def best_response_h(model: MarketModel, theta: float, t: float, x, p, gamma) -> np.ndarray:
    """Investor's best response to a fixed benchmark volatility ``gamma``."""
    half = 0.5 * theta
    rhs = excess_drift(model, t, x) + half * model.Sigma @ gamma - half * model.Sigma @ (model.Lambda.T @ p)
    return (2.0 / (theta + 2.0)) * np.linalg.solve(model.Sigma @ model.Sigma.T, rhs)


def best_response_gamma(model: MarketModel, theta: float, p, h) -> np.ndarray:
    """Market's best response to a fixed allocation ``h``."""
    return -(theta / (2.0 - theta)) * (model.Sigma.T @ h + model.Lambda.T @ p)


class FeedbackStrategy:
    """Saddle feedback ``(t, x) -> (h_hat, gamma_hat)`` built from solved value coefficients.

    The gradient used is ``p = Q_t x + q_t`` with coefficients interpolated
    linearly between grid nodes.
    """

    def __init__(self, coeffs):
        self.coeffs = coeffs
        self.model = coeffs.model
        self.theta = coeffs.theta

    def gradient(self, t, X):
        Q, q, _ = self.coeffs.at(t)
        return X @ Q + q  # Q symmetric

    def evaluate(self, t, X):
        X = np.atleast_2d(X)
        return solve_saddle_batch(self.model, self.theta, t, X, self.gradient(t, X))

    def __call__(self, t, x) -> ControlPair:
        h, gamma = self.evaluate(t, np.asarray(x, dtype=float)[None, :])
        return ControlPair(h[0], gamma[0])


class PerturbedStrategy:
    """A base strategy shifted by constant offsets in ``h`` and/or ``gamma``."""

    def __init__(self, base, dh=None, dgamma=None):
        self.base = base
        self.dh = None if dh is None else np.asarray(dh, dtype=float)
        self.dgamma = None if dgamma is None else np.asarray(dgamma, dtype=float)

    def evaluate(self, t, X):
        h, gamma = self.base.evaluate(t, X)
        if self.dh is not None:
            h = h + self.dh
        if self.dgamma is not None:
            gamma = gamma + self.dgamma
        return h, gamma


def feedback_strategy(coeffs) -> FeedbackStrategy:
    return FeedbackStrategy(coeffs)
