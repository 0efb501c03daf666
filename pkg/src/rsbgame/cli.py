"""Command-line entry point: ``rsbgame {validate,solve,verify,simulate,compare-coefficients}``.

Exit codes: 0 success, 1 domain failure (invalid model, blow-up, failed
certificate), 2 usage or parse error. Primary output is JSON with a fixed
key order and floats written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .mcsim import (
    doleans_mean_check,
    estimate_J,
    richardson_J,
    saddle_tournament,
    simulate,
)
from .oracle import gaussian_moments_constant_controls, gaussian_J
from .saddle import ControlPair, FeedbackStrategy, SingularSaddleSystem
from .scenario import ScenarioParseError, load_scenario
from .valueode import NonFiniteCoefficients, ValueCoefficients, paper_coefficients_compare, solve_backward
from .verify import fd_consistency_check, isaacs_sign_check

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _json(obj, indent: int = 0, step: int = 2) -> str:
    pad, inner = " " * indent, " " * (indent + step)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{k}": {_json(v, indent + step)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(v, indent) for v in np.asarray(obj, dtype=object).ravel().tolist()) + "]" if np.ndim(obj) <= 1 else "[" + ", ".join(_json(v, indent) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else '"' + str(x) + '"'
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit(obj) -> None:
    print(_json(obj))


def _load(path):
    scenario = load_scenario(path)
    report = scenario.validate()
    return scenario, report


def cmd_validate(args) -> int:
    scenario, report = _load(args.scenario)
    for line in report.lines():
        print(line)
    if report.ok:
        print("ok")
    return EXIT_OK if report.ok else EXIT_FAIL


def _checked(args):
    scenario, report = _load(args.scenario)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return scenario, None
    return scenario, report


def _steps(args, scenario):
    return args.steps if args.steps is not None else scenario.run.n_steps


def cmd_solve(args) -> int:
    scenario, ok = _checked(args)
    if ok is None:
        return EXIT_FAIL
    model, spec = scenario.model, scenario.spec
    coeffs = solve_backward(model, spec, _steps(args, scenario))
    if args.out:
        coeffs.to_csv(args.out)
    pair = FeedbackStrategy(coeffs)(0.0, spec.x0)
    emit(
        {
            "u0": coeffs.value(0.0, spec.x0),
            "h0": pair.h,
            "gamma0": pair.gamma,
            "Q0": coeffs.Q[0],
            "q0": coeffs.q[0],
            "k0": coeffs.k[0],
            "n_steps": len(coeffs.grid) - 1,
            "csv": args.out,
        }
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario, ok = _checked(args)
    if ok is None:
        return EXIT_FAIL
    model, spec = scenario.model, scenario.spec
    if args.coefficients:
        coeffs = ValueCoefficients.from_csv(args.coefficients, model, spec.theta)
    else:
        coeffs = solve_backward(model, spec, _steps(args, scenario))
    tol_res = args.tol_res if args.tol_res is not None else scenario.run.tol_res
    seed = args.seed if args.seed is not None else scenario.run.seed
    isaacs = isaacs_sign_check(coeffs, n_perturb=args.perturbations, seed=seed, tol_res=tol_res, x0=spec.x0, log_f=spec.log_f0)
    fd = fd_consistency_check(coeffs, seed=seed)
    passed = isaacs.passed and fd.passed
    emit({"isaacs": isaacs.to_dict(), "fd": fd.to_dict(), "passed": passed})
    return EXIT_OK if passed else EXIT_FAIL


def _parse_strategy(text: str, model):
    kind, _, arg = text.partition(":")
    if kind == "saddle" and not arg:
        return ("saddle", None)
    if kind == "constant":
        if "/" in arg:
            h_txt, _, g_txt = arg.partition("/")
            h = [float(v) for v in h_txt.split(",") if v.strip()]
            g = [float(v) for v in g_txt.split(",") if v.strip()]
        else:
            values = [float(v) for v in arg.split(",") if v.strip()]
            h, g = values[: model.m], values[model.m :]
        if len(h) != model.m or len(g) != model.n_noise:
            raise ValueError(f"constant strategy needs {model.m} h values and {model.n_noise} gamma values")
        return ("constant", ControlPair(h, g))
    if kind == "perturbed":
        return ("perturbed", float(arg))
    raise ValueError(f"unknown strategy {text!r}; use saddle, constant:h1,..,g1,.. (optionally h/g) or perturbed:delta")


def cmd_simulate(args) -> int:
    scenario, ok = _checked(args)
    if ok is None:
        return EXIT_FAIL
    model, spec, run = scenario.model, scenario.spec, scenario.run
    try:
        kind, payload = _parse_strategy(args.strategy, model)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    n_paths = args.paths if args.paths is not None else run.n_paths
    n_steps = args.steps if args.steps is not None else run.sim_steps
    seed = args.seed if args.seed is not None else run.seed
    out = {"strategy": args.strategy, "n_paths": n_paths, "n_steps": n_steps, "seed": seed}
    passed = True
    if kind == "constant":
        bundle = simulate(model, spec, payload, n_paths, n_steps, seed)
        est = estimate_J(bundle, spec.theta)
        moments = gaussian_moments_constant_controls(model, spec, payload)
        out["J"] = est.to_dict()
        out["gaussian_J"] = gaussian_J(moments, spec.theta)
        out["mean_F"], out["var_F"] = moments.mean_F, moments.var_F
        if args.per_path:
            bundle.to_csv(args.per_path)
    else:
        coeffs = solve_backward(model, spec, run.n_steps)
        u0 = coeffs.value(0.0, spec.x0)
        out["u0"] = u0
        if kind == "saddle":
            rich = richardson_J(model, spec, FeedbackStrategy(coeffs), n_paths, n_steps, seed)
            dol = doleans_mean_check(model, spec, FeedbackStrategy(coeffs), n_paths, n_steps, seed)
            out["J"] = rich.fine.to_dict()
            out["J_coarse"] = rich.coarse.to_dict()
            out["allowance"] = rich.allowance
            out["value_match"] = rich.covers(u0)
            out["doleans"] = dol.to_dict()
            out["doleans_ok"] = dol.covers(1.0)
            passed = out["value_match"] and out["doleans_ok"]
            if args.per_path:
                simulate(model, spec, FeedbackStrategy(coeffs), n_paths, n_steps, seed).to_csv(args.per_path)
        else:
            result = saddle_tournament(model, spec, coeffs, magnitudes=(payload,), n_paths=n_paths, seed=seed, n_steps=n_steps)
            out["J_saddle"] = result.saddle.to_dict()
            out["deviations"] = [
                {"label": r.label, "player": r.player, "J": r.estimate.mean, "diff": r.diff, "stderr_diff": r.stderr_diff, "ordered": r.ordered}
                for r in result.rows
            ]
            passed = result.all_ordered
    out["passed"] = passed
    emit(out)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_compare(args) -> int:
    scenario, ok = _checked(args)
    if ok is None:
        return EXIT_FAIL
    seed = args.seed if args.seed is not None else scenario.run.seed
    report = paper_coefficients_compare(scenario.model, scenario.spec.theta, t=args.t, seed=seed)
    emit(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsbgame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check a scenario file")
    p = add("solve", cmd_solve, "solve the value ODEs and print u(0, x0) and the saddle controls")
    p.add_argument("--steps", type=int, help="RK4 steps (default: scenario n_steps or 400 per unit horizon)")
    p.add_argument("--out", help="write value coefficients CSV here")
    p = add("verify", cmd_verify, "certify the HJBI residual, Isaacs signs and finite-difference consistency")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol-res", type=float)
    p.add_argument("--perturbations", type=int, default=500)
    p.add_argument("--coefficients", help="verify this coefficients CSV instead of solving")
    p = add("simulate", cmd_simulate, "Monte Carlo estimates of the criterion")
    p.add_argument("--strategy", default="saddle", help="saddle | constant:h1,..,g1,.. | perturbed:delta")
    p.add_argument("--steps", type=int, help="Euler steps (default: scenario sim_steps)")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="per_path", help="write per-path CSV (path, logF)")
    p = add("compare-coefficients", cmd_compare, "diagnostic: extracted vs closed-form coefficient ODE right-hand sides")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteCoefficients, SingularSaddleSystem) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
