"""Monte Carlo estimation of the game criterion under both measures.

Random numbers
--------------
Path ``i`` of a run with seed ``s`` draws its Brownian increments from
``numpy.random.Generator(Philox(key=[s, i]))`` (Philox4x64-10, counter
starting at zero) via ``standard_normal((n_steps * substeps, n_noise))``
scaled by ``sqrt(dt / substeps)``. The increments of a path therefore
depend only on ``(s, i)``; paths are processed in fixed-size chunks whose
boundaries depend only on the path index, so results are bit-identical for
any number of worker threads.

Running a coarse grid with ``substeps=2`` sums consecutive pairs of the
same fine increments, which gives the common-random-number pairing used by
the Richardson discretization allowance.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import GameSpec, MarketModel, excess_drift, g_value
from .saddle import FeedbackStrategy, PerturbedStrategy

__all__ = [
    "BudgetExceeded",
    "NonFinitePath",
    "DegenerateSample",
    "PathBundle",
    "Estimate",
    "brownian_increments",
    "simulate",
    "simulate_many",
    "estimate_J",
    "estimate_I",
    "estimate_I_changed_measure",
    "doleans_mean_check",
    "paired_difference",
    "richardson_J",
    "TournamentRow",
    "saddle_tournament",
]

DEFAULT_BUDGET = 2_000_000_000
CHUNK_SIZE = 4096
MAX_EXCLUDED_FRACTION = 1e-3


class BudgetExceeded(RuntimeError):
    pass


class NonFinitePath(ArithmeticError):
    pass


class DegenerateSample(ValueError):
    pass


@dataclass
class PathBundle:
    """Terminal path statistics of one simulated strategy.

    Under the physical measure ``log_F`` (log wealth over benchmark) and
    ``log_doleans`` (log of the measure-change density) are filled; under
    the changed measure ``g_integral`` holds the left-point integral of the
    running cost. ``valid`` marks paths kept after non-finite exclusion.
    """

    dt: float
    n_steps: int
    n_paths: int
    seed: int
    measure: str
    valid: np.ndarray
    log_F: np.ndarray | None = None
    log_doleans: np.ndarray | None = None
    g_integral: np.ndarray | None = None
    X: np.ndarray | None = None
    label: str = ""

    @property
    def n_excluded(self) -> int:
        return int(self.n_paths - np.count_nonzero(self.valid))

    def to_csv(self, path) -> None:
        """Per-path export: path index and terminal ``log_F`` (physical) or ``g_integral``."""
        column, values = ("logF", self.log_F) if self.measure == "physical" else ("g_integral", self.g_integral)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", column])
            for i, v in enumerate(values):
                writer.writerow([i, format(float(v), ".17g")])


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_paths: int
    confidence: float = 3.0
    n_excluded: int = 0
    seed: int | None = None
    n_steps: int | None = None

    def band(self, extra: float = 0.0) -> float:
        return self.confidence * self.stderr + extra

    def covers(self, target: float, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= self.band(extra)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "n_excluded": self.n_excluded,
            "confidence": self.confidence,
            "seed": self.seed,
            "n_steps": self.n_steps,
        }


def _path_key(seed: int, index: int) -> np.ndarray:
    return np.array([seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)


def brownian_increments(seed: int, start: int, stop: int, n_steps: int, dim: int, dt: float, substeps: int = 1) -> np.ndarray:
    """Increments for paths ``start..stop-1``, shape (paths, n_steps, dim)."""
    out = np.empty((stop - start, n_steps * substeps, dim))
    for row, i in enumerate(range(start, stop)):
        gen = np.random.Generator(np.random.Philox(key=_path_key(seed, i)))
        out[row] = gen.standard_normal((n_steps * substeps, dim))
    out *= np.sqrt(dt / substeps)
    if substeps > 1:
        out = out.reshape(stop - start, n_steps, substeps, dim).sum(axis=2)
    return out


def _run_chunk(model, spec, strategies, dW, dt, measure, store_paths):
    theta = spec.theta
    half = 0.5 * theta
    k, n_steps, _ = dW.shape
    results = []
    for strategy in strategies:
        X = np.broadcast_to(spec.x0, (k, model.n)).copy()
        paths = np.empty((k, n_steps + 1, model.n)) if store_paths else None
        if store_paths:
            paths[:, 0] = X
        if measure == "physical":
            log_F = np.full(k, spec.log_f0)
            log_E = np.zeros(k)
        else:
            g_int = np.zeros(k)
        for j in range(n_steps):
            t = j * dt
            dw = dW[:, j]
            H, G = strategy.evaluate(t, X)
            HS = H @ model.Sigma
            vol_gap = HS - G
            if measure == "physical":
                d = excess_drift(model, t, X)
                drift_F = (
                    model.r(t)
                    + np.sum(H * d, axis=1)
                    - (model.alpha(t) + X @ model.beta)
                    - 0.5 * np.sum(HS * HS, axis=1)
                    + 0.5 * np.sum(G * G, axis=1)
                )
                shock = np.sum(vol_gap * dw, axis=1)
                log_F = log_F + drift_F * dt + shock
                log_E = log_E - half * shock - 0.5 * half * half * np.sum(vol_gap * vol_gap, axis=1) * dt
                X = X + (model.b + X @ model.B.T) * dt + dw @ model.Lambda.T
            else:
                g_int = g_int + g_value(model, theta, t, X, H, G) * dt
                X = X + (model.b + X @ model.B.T - half * vol_gap @ model.Lambda.T) * dt + dw @ model.Lambda.T
            if store_paths:
                paths[:, j + 1] = X
        if measure == "physical":
            results.append({"log_F": log_F, "log_doleans": log_E, "X": paths, "X_T": X})
        else:
            results.append({"g_integral": g_int, "X": paths, "X_T": X})
    return results


def simulate_many(
    model: MarketModel,
    spec: GameSpec,
    strategies: dict,
    n_paths: int,
    n_steps: int,
    seed: int,
    measure: str = "physical",
    *,
    substeps: int = 1,
    store_paths: bool = False,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
    budget: int = DEFAULT_BUDGET,
) -> dict:
    """Simulate several strategies on the same Brownian paths.

    ``strategies`` maps labels to objects with ``evaluate(t, X) -> (H, G)``
    (a ``ControlPair`` acts as a constant strategy). Returns label ->
    ``PathBundle``.
    """
    if measure not in ("physical", "changed"):
        raise ValueError(f"unknown measure {measure!r}")
    if n_paths < 1 or n_steps < 1 or substeps < 1:
        raise ValueError("n_paths, n_steps and substeps must be >= 1")
    if n_paths * n_steps * substeps * max(1, len(strategies)) > budget:
        raise BudgetExceeded(f"{n_paths} paths x {n_steps * substeps} steps exceeds budget {budget}")
    dt = spec.horizon_T / n_steps
    labels = list(strategies)
    strats = [strategies[lab] for lab in labels]
    bounds = [(s, min(s + chunk_size, n_paths)) for s in range(0, n_paths, chunk_size)]

    def work(bound):
        dW = brownian_increments(seed, bound[0], bound[1], n_steps, model.n_noise, dt, substeps)
        with np.errstate(over="ignore", invalid="ignore"):  # non-finite paths are counted below
            return _run_chunk(model, spec, strats, dW, dt, measure, store_paths)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, bounds))
    else:
        chunks = [work(b) for b in bounds]

    out = {}
    for idx, label in enumerate(labels):
        parts = [c[idx] for c in chunks]
        cat = lambda key: np.concatenate([p[key] for p in parts]) if parts[0][key] is not None else None  # noqa: E731
        X_T = cat("X_T")
        valid = np.all(np.isfinite(X_T), axis=1)
        fields = {}
        for key in ("log_F", "log_doleans", "g_integral"):
            if key in parts[0]:
                fields[key] = cat(key)
                valid &= np.isfinite(fields[key])
        bundle = PathBundle(
            dt=dt, n_steps=n_steps, n_paths=n_paths, seed=seed, measure=measure, valid=valid, X=cat("X"), label=str(label), **fields
        )
        if bundle.n_excluded > MAX_EXCLUDED_FRACTION * n_paths:
            raise NonFinitePath(f"{bundle.n_excluded} of {n_paths} paths non-finite for strategy {label!r}")
        out[label] = bundle
    return out


def simulate(model: MarketModel, spec: GameSpec, strategy, n_paths: int, n_steps: int, seed: int, measure: str = "physical", **kwargs) -> PathBundle:
    """Euler-Maruyama simulation of one strategy; see :func:`simulate_many`."""
    return simulate_many(model, spec, {"strategy": strategy}, n_paths, n_steps, seed, measure, **kwargs)["strategy"]


def _log_mean_exp(y: np.ndarray):
    """``log(mean(exp(y)))`` and the normalized weights ``exp(y)/mean``."""
    shift = np.max(y)
    w = np.exp(y - shift)
    mean = w.mean()
    return np.log(mean) + shift, w / mean


def _risk_sensitive(y: np.ndarray, scale: float, offset: float, bundle: PathBundle) -> Estimate:
    if y.size == 0:
        raise DegenerateSample("all paths excluded")
    log_mean, ratio = _log_mean_exp(y)
    se = abs(scale) * (ratio.std(ddof=1) / np.sqrt(y.size) if y.size > 1 else 0.0)
    return Estimate(
        mean=float(offset + scale * log_mean),
        stderr=float(se),
        n_paths=int(y.size),
        n_excluded=bundle.n_excluded,
        seed=bundle.seed,
        n_steps=bundle.n_steps,
    )


def estimate_J(bundle: PathBundle, theta: float) -> Estimate:
    """``-(2/theta) log E[exp(-(theta/2) log F)]`` with a delta-method standard error."""
    if bundle.measure != "physical":
        raise ValueError("estimate_J needs a physical-measure bundle")
    return _risk_sensitive(-0.5 * theta * bundle.log_F[bundle.valid], -2.0 / theta, 0.0, bundle)


def estimate_I(bundle: PathBundle, theta: float, log_f: float) -> Estimate:
    """``log f - (2/theta) log E^{h,gamma}[exp((theta/2) int g ds)]`` from a changed-measure bundle."""
    if bundle.measure != "changed":
        raise ValueError("estimate_I needs a changed-measure bundle")
    return _risk_sensitive(0.5 * theta * bundle.g_integral[bundle.valid], -2.0 / theta, log_f, bundle)


def estimate_I_changed_measure(model, spec, strategy, n_paths: int, n_steps: int, seed: int, **kwargs) -> Estimate:
    bundle = simulate(model, spec, strategy, n_paths, n_steps, seed, measure="changed", **kwargs)
    return estimate_I(bundle, spec.theta, spec.log_f0)


def doleans_mean_check(model, spec, strategy, n_paths: int, n_steps: int, seed: int, **kwargs) -> Estimate:
    """Sample mean of the measure-change density at ``T`` (target 1)."""
    bundle = simulate(model, spec, strategy, n_paths, n_steps, seed, **kwargs)
    dens = np.exp(bundle.log_doleans[bundle.valid])
    if dens.size == 0:
        raise DegenerateSample("all paths excluded")
    se = dens.std(ddof=1) / np.sqrt(dens.size) if dens.size > 1 else 0.0
    return Estimate(float(dens.mean()), float(se), int(dens.size), n_excluded=bundle.n_excluded, seed=seed, n_steps=n_steps)


def paired_difference(a: PathBundle, b: PathBundle, theta: float):
    """``J(a) - J(b)`` and its delta-method standard error for bundles on common paths."""
    keep = a.valid & b.valid
    la, ra = _log_mean_exp(-0.5 * theta * a.log_F[keep])
    lb, rb = _log_mean_exp(-0.5 * theta * b.log_F[keep])
    diff = -2.0 / theta * (la - lb)
    n = int(np.count_nonzero(keep))
    se = 2.0 / theta * (ra - rb).std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return float(diff), float(se)


@dataclass
class RichardsonJ:
    fine: Estimate
    coarse: Estimate
    allowance: float

    def covers(self, target: float) -> bool:
        return self.fine.covers(target, self.allowance)


def richardson_J(model, spec, strategy, n_paths: int, n_steps: int, seed: int, **kwargs) -> RichardsonJ:
    """J on ``n_steps`` and on half as many steps over the same Brownian paths.

    For a first-order scheme the fine-grid bias is about ``|J_fine - J_coarse|``,
    which is returned as the discretization allowance ``C * dt``.
    """
    if n_steps % 2:
        raise ValueError("n_steps must be even for the two-grid comparison")
    fine = estimate_J(simulate(model, spec, strategy, n_paths, n_steps, seed, **kwargs), spec.theta)
    coarse = estimate_J(simulate(model, spec, strategy, n_paths, n_steps // 2, seed, substeps=2, **kwargs), spec.theta)
    return RichardsonJ(fine, coarse, abs(fine.mean - coarse.mean))


@dataclass
class TournamentRow:
    label: str
    player: str
    magnitude: float
    estimate: Estimate
    diff: float
    stderr_diff: float
    ordered: bool


@dataclass
class TournamentResult:
    saddle: Estimate
    rows: list = field(default_factory=list)

    @property
    def all_ordered(self) -> bool:
        return all(r.ordered for r in self.rows)


def saddle_tournament(
    model: MarketModel,
    spec: GameSpec,
    coeffs,
    magnitudes=(0.05, 0.1, 0.2, 0.5, 1.0),
    n_paths: int = 100_000,
    seed: int = 0,
    n_steps: int = 250,
    h_direction=None,
    gamma_direction=None,
    confidence: float = 3.0,
    **kwargs,
) -> TournamentResult:
    """Compare the saddle feedback against one-sided constant deviations.

    Investor deviations ``h_hat + s * h_direction`` must not raise J beyond
    ``confidence`` paired standard errors; market deviations
    ``gamma_hat + s * gamma_direction`` must not lower it. All strategies run
    on common random numbers.
    """
    base = FeedbackStrategy(coeffs)
    dh = np.eye(model.m)[0] if h_direction is None else np.asarray(h_direction, dtype=float)
    dg = np.eye(model.n_noise)[0] if gamma_direction is None else np.asarray(gamma_direction, dtype=float)
    strategies = {"saddle": base}
    for s in magnitudes:
        strategies[f"h+{s:g}"] = PerturbedStrategy(base, dh=s * dh)
        strategies[f"gamma+{s:g}"] = PerturbedStrategy(base, dgamma=s * dg)
    bundles = simulate_many(model, spec, strategies, n_paths, n_steps, seed, **kwargs)
    ref = bundles["saddle"]
    result = TournamentResult(saddle=estimate_J(ref, spec.theta))
    for label, bundle in bundles.items():
        if label == "saddle":
            continue
        player = "investor" if label.startswith("h+") else "market"
        diff, se = paired_difference(bundle, ref, spec.theta)
        ordered = diff <= confidence * se if player == "investor" else diff >= -confidence * se
        result.rows.append(
            TournamentRow(label, player, float(label.split("+")[1]), estimate_J(bundle, spec.theta), diff, se, ordered)
        )
    return result
