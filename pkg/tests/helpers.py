"""Random scenario builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from rsbgame import GameSpec, MarketModel


def random_model(rng: np.random.Generator, m: int, n: int, *, r=0.02, alpha=0.03) -> MarketModel:
    k = n + m
    Sigma = 0.15 * rng.normal(size=(m, k))
    Sigma[:, :m] += 0.25 * np.eye(m)
    B = -np.diag(rng.uniform(0.5, 1.5, size=n)) + 0.1 * rng.normal(size=(n, n))
    return MarketModel(
        a=0.05 + 0.03 * rng.normal(size=m),
        A=0.2 * rng.normal(size=(m, n)),
        b=0.05 * rng.normal(size=n),
        B=B,
        Sigma=Sigma,
        Lambda=0.2 * rng.normal(size=(n, k)),
        r=r,
        alpha=alpha,
        beta=0.1 * rng.normal(size=n),
    )


def random_spec(rng: np.random.Generator, model: MarketModel, theta: float, T: float = 1.0) -> GameSpec:
    return GameSpec(theta=theta, horizon_T=T, x0=0.2 * rng.normal(size=model.n), v0=1.0, l0=float(rng.uniform(0.8, 1.2)))


def scalar_model(**overrides) -> MarketModel:
    """m = n = 1 with Sigma = [1 0], Lambda = [0 1], a = 0.05, r = 0.01."""
    base = dict(a=[0.05], A=[[0.0]], b=[0.0], B=[[0.0]], Sigma=[[1.0, 0.0]], Lambda=[[0.0, 1.0]], r=0.01, alpha=0.0, beta=[0.0])
    base.update(overrides)
    return MarketModel(**base)


def zero_model(m: int = 1, n: int = 1) -> MarketModel:
    k = n + m
    Sigma = np.zeros((m, k))
    Sigma[:, :m] = 0.2 * np.eye(m)
    Lambda = np.zeros((n, k))
    Lambda[:, m:] = 0.1 * np.eye(n)
    return MarketModel(
        a=np.zeros(m), A=np.zeros((m, n)), b=np.zeros(n), B=np.zeros((n, n)), Sigma=Sigma, Lambda=Lambda, r=0.0, alpha=0.0, beta=np.zeros(n)
    )
