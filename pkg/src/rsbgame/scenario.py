"""JSON scenario documents.

A scenario is one flat JSON object::

    {
      "m": 1, "n": 1,
      "a": [0.06], "A": [[0.5]], "b": [0.0], "B": [[-1.0]],
      "Sigma": [[0.2, 0.05]], "Lambda": [[0.1, 0.3]],
      "r": 0.02, "alpha": [[0.0, 0.03], [1.0, 0.035]], "beta": [0.2],
      "theta": 1.0, "T": 1.0, "x0": [0.1], "v0": 1.0, "l0": 1.0,
      "n_steps": 400, "sim_steps": 250, "n_paths": 100000, "seed": 20240601, "tol_res": 1e-6
    }

Matrices are row-major nested arrays. ``r`` and ``alpha`` are either a
number or a list of ``[t, value]`` breakpoints (piecewise linear, constant
beyond the ends). ``beta`` may be given as ``[..]`` or ``[[..]]``. The run
parameters are optional; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .model import DimensionMismatch, GameSpec, MarketModel, ValidationReport, validate

__all__ = ["ScenarioParseError", "RunConfig", "Scenario", "parse_scenario", "load_scenario", "bundled_scenario", "BUNDLED"]

MODEL_KEYS = ("a", "A", "b", "B", "Sigma", "Lambda", "r", "alpha", "beta")
SPEC_KEYS = ("theta", "T", "x0", "v0", "l0")
RUN_DEFAULTS = {"n_steps": None, "sim_steps": 250, "n_paths": 100_000, "seed": 0, "tol_res": 1e-6, "theta_margin": 1e-3}
BUNDLED = ("scalar_benchmark", "two_factor", "zero")


class ScenarioParseError(ValueError):
    pass


@dataclass
class RunConfig:
    n_steps: int | None = None
    sim_steps: int = 250
    n_paths: int = 100_000
    seed: int = 0
    tol_res: float = 1e-6
    theta_margin: float = 1e-3


@dataclass
class Scenario:
    model: MarketModel
    spec: GameSpec
    run: RunConfig = field(default_factory=RunConfig)
    declared: tuple | None = None  # (m, n) as written in the file

    def validate(self) -> ValidationReport:
        report = validate(self.model, self.spec)
        if self.declared is not None:
            m, n = self.declared
            if m != self.model.m:
                report.errors.insert(0, DimensionMismatch("m", f"declared {m}, Sigma has {self.model.m} rows"))
            if n != self.model.n:
                report.errors.insert(0, DimensionMismatch("n", f"declared {n}, Lambda has {self.model.n} rows"))
        return report

    def to_dict(self) -> dict:
        md, sp = self.model, self.spec
        out = {"m": md.m, "n": md.n}
        for key in MODEL_KEYS:
            value = getattr(md, key)
            out[key] = value.to_json() if hasattr(value, "to_json") else value.tolist()
        out.update(theta=sp.theta, T=sp.horizon_T, x0=sp.x0.tolist(), v0=sp.v0, l0=sp.l0)
        out.update({k: getattr(self.run, k) for k in RUN_DEFAULTS})
        return out


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    allowed = {"m", "n", *MODEL_KEYS, *SPEC_KEYS, *RUN_DEFAULTS}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ScenarioParseError(f"unknown field(s): {', '.join(unknown)}")
    missing = [k for k in ("m", "n", *MODEL_KEYS, "theta", "T", "x0") if k not in doc]
    if missing:
        raise ScenarioParseError(f"missing field(s): {', '.join(missing)}")
    run = RunConfig(**{k: doc.get(k, v) for k, v in RUN_DEFAULTS.items()})
    try:
        model = MarketModel(**{k: doc[k] for k in MODEL_KEYS})
        spec = GameSpec(
            theta=doc["theta"],
            horizon_T=doc["T"],
            x0=doc["x0"],
            v0=doc.get("v0", 1.0),
            l0=doc.get("l0", 1.0),
            theta_margin=run.theta_margin,
        )
        declared = (int(doc["m"]), int(doc["n"]))
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(str(exc)) from exc
    return Scenario(model, spec, run, declared)


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: malformed JSON: {exc}") from exc
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    return parse_scenario(doc)


def bundled_scenario(name: str) -> Scenario:
    """One of the example scenarios shipped with the package (see ``BUNDLED``)."""
    text = resources.files("rsbgame").joinpath("scenarios").joinpath(f"{name}.json").read_text()
    return parse_scenario(json.loads(text))


def bundled_path(name: str) -> str:
    return str(resources.files("rsbgame").joinpath("scenarios").joinpath(f"{name}.json"))
