"""Command-line front end.

One subcommand per capability: check-pdi, verify-ineq, smooth-lhs,
find-counterexample, audit-measure, solve-obstacle, catalog.  Reports are
JSON ("schema": "v1") embedding the fully resolved configuration and the tool
version; bulk numeric data lands in CSV side files next to the report.  Exit
codes: 0 condition verified / no counterexample, 1 violation found (witness
files written), 2 usage or configuration error, 3 numerical precision
failure.  A fixed seed makes reports byte-identical across runs on the same
platform.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, LabError, ParameterError, PrecisionError
from .gaussian import MeasureSpec, general_gaussian, standard_gaussian
from .measures import (PotentialV, audit_measure, gaussian_potential, make_potential,
                       quartic_potential)
from .necessity import counterexample_search
from .obstacle import ObstacleProblem, dominance_check, solve
from .pdi import WeightPair, check_pdi_grid
from .supconv import (GridFunction, gap_scale, grid_function_from_csv, inequality_gap,
                      lp_smoothed_lhs, sup_convolve)
from .surfaces import SurfaceH, catalog_ids, from_catalog
from . import fixtures

SCHEMA = "v1"

CONFIG_KEYS = {
    "command", "surface", "weights", "measure", "f", "g", "resolution",
    "tolerance", "nodes", "R", "alpha", "beta", "budget", "family", "seed",
    "out", "threads", "max_sweeps", "inset", "safety", "potential", "width",
}

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_PRECISION = 3


def _threads_default() -> Optional[int]:
    env = os.environ.get("EHRHARD_LAB_THREADS")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"EHRHARD_LAB_THREADS must be an integer, got {env!r}") from exc


def surface_implied_weights(surface_id: str) -> Optional[tuple[float, float]]:
    """The weight pair a catalog id carries, when it determines one."""
    name, _, argstr = surface_id.partition(":")
    args = {}
    for item in filter(None, argstr.split(",")):
        k, _, v = item.partition("=")
        try:
            args[k.strip()] = float(v)
        except ValueError:
            return None
    if name == "ehrhard" and "a" in args and "b" in args:
        return args["a"], args["b"]
    if name == "pl" and "a" in args:
        return args["a"], 1.0 - args["a"]
    if name == "pl_a_minus_b" and "a" in args:
        return args["a"], args["a"] - 1.0
    if name == "pl_b_minus_a" and "a" in args:
        return -args["a"], -args["a"] - 1.0
    if name == "mp" and "a" in args:
        return args["a"], 1.0 - args["a"]
    return None


def parse_weights(text: str) -> tuple[float, float]:
    try:
        a_s, b_s = text.split(",")
        return float(a_s), float(b_s)
    except ValueError as exc:
        raise ConfigError(f"weights must look like '0.5,0.5', got {text!r}") from exc


def resolve_weights(config: dict) -> WeightPair:
    implied = surface_implied_weights(config.get("surface", "")) if config.get("surface") else None
    given = parse_weights(config["weights"]) if config.get("weights") else None
    if given and implied and (abs(given[0] - implied[0]) > 1e-12 or abs(given[1] - implied[1]) > 1e-12):
        raise ConfigError(
            f"weights {given} conflict with the surface id's weights {implied}")
    pair = given or implied
    if pair is None:
        raise ConfigError("no weights: pass --weights a,b or a surface id that implies them")
    try:
        return WeightPair(*pair)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def parse_measure(text: str) -> MeasureSpec:
    if text in ("std", "standard", "standard_gaussian"):
        return standard_gaussian(1)
    name, _, argstr = text.partition(":")
    args = {}
    for item in filter(None, argstr.split(",")):
        k, _, v = item.partition("=")
        try:
            args[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"bad measure argument {item!r}") from exc
    if name == "gaussian":
        mean = args.get("mean", 0.0)
        var = args.get("var", 1.0)
        if var <= 0:
            raise ConfigError(f"gaussian measure needs var > 0, got {var}")
        # exp(-xAx + bx + c): A = 1/(2 var), b = mean/var
        return general_gaussian(np.array([[1.0 / (2.0 * var)]]), np.array([mean / var]))
    raise ConfigError(f"unknown measure {text!r} (use 'std' or 'gaussian:mean=..,var=..')")


def parse_potential(text: str) -> PotentialV:
    if text == "gaussian":
        return gaussian_potential()
    if text == "quartic":
        return quartic_potential()
    if text == "near-gaussian-cos":
        return make_potential(lambda x: x ** 2 / 2 + 1e-3 * np.cos(x),
                              lambda x: x - 1e-3 * np.sin(x),
                              lambda x: 1.0 - 1e-3 * np.cos(x),
                              label="near-gaussian-cos")
    if text.startswith("gaussian:"):
        args = dict(item.split("=") for item in text.partition(":")[2].split(","))
        return gaussian_potential(mean=float(args.get("mean", 0.0)),
                                  var=float(args.get("var", 1.0)))
    raise ConfigError(f"unknown potential {text!r}")


def parse_grid_function(text: str, rng: np.random.Generator,
                        surface: Optional[SurfaceH], side: str) -> GridFunction:
    if text.startswith("csv:"):
        return grid_function_from_csv(text[4:])
    name, _, argstr = text.partition(":")
    args = {}
    for item in filter(None, argstr.split(",")):
        k, _, v = item.partition("=")
        try:
            args[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"bad test-function argument {item!r}") from exc
    side_lo, side_hi = (-np.inf, np.inf)
    if surface is not None:
        x0, x1, y0, y1 = surface.domain
        side_lo, side_hi = (x0, x1) if side == "f" else (y0, y1)
    if name == "const":
        return fixtures.constant(args["value"])
    if name == "bump":
        floor = max(args.get("floor", 0.0), side_lo if np.isfinite(side_lo) else 0.0)
        return fixtures.gaussian_bump(height=args.get("height", 1.0),
                                      center=args.get("center", 0.0),
                                      width=args.get("width", 1.0),
                                      floor=floor)
    if name == "halfline":
        lo_val = max(0.01, side_lo + 1e-12) if np.isfinite(side_lo) else 0.01
        hi_val = min(0.99, side_hi - 1e-12) if np.isfinite(side_hi) else 0.99
        return fixtures.logistic_halfline(args.get("threshold", 2.6), args.get("width", 0.01),
                                          lo_val=lo_val, hi_val=hi_val)
    if name == "random":
        if surface is None:
            raise ConfigError("random test functions need a surface for their range")
        x0, x1, y0, y1 = surface.domain
        lo, hi = (x0, x1) if side == "f" else (y0, y1)
        return fixtures.random_smooth_in(rng, lo + 0.02 * (hi - lo), hi - 0.55 * (hi - lo))
    raise ConfigError(f"unknown test function {text!r}")


def parse_config(source) -> dict:
    """Validate a config mapping (or JSON file path) into a resolved dict."""
    if isinstance(source, (str, Path)):
        try:
            with open(source) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    elif isinstance(source, dict):
        data = dict(source)
    else:
        raise ConfigError(f"config source must be a path or mapping, got {type(source)}")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "command" not in data:
        raise ConfigError("config needs a 'command' key")
    for key in ("seed", "budget", "nodes", "resolution", "threads", "max_sweeps"):
        if key in data and data[key] is not None and not isinstance(data[key], int):
            raise ConfigError(f"config key {key!r} must be an integer, got {data[key]!r}")
    data.setdefault("seed", 0)
    if data.get("threads") is None:
        data["threads"] = _threads_default()
    return data


def _report(config: dict, result: dict, out_dir: Path) -> Path:
    payload = {"schema": SCHEMA, "version": __version__,
               "command": config["command"], "config": config, "result": result}
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def run(config: dict) -> int:
    """Execute a resolved config; writes report files and returns the exit code."""
    config = parse_config(config)
    command = config["command"]
    out_dir = Path(config.get("out") or ".")
    rng = np.random.default_rng(config.get("seed", 0))

    if command == "catalog":
        _report(config, {"surfaces": catalog_ids()}, out_dir)
        return EXIT_OK

    if command == "audit-measure":
        pot = parse_potential(config.get("potential", "gaussian"))
        audit = audit_measure(pot)
        _report(config, json.loads(audit.to_json()), out_dir)
        return EXIT_OK if audit.passed else EXIT_VIOLATION

    if command == "solve-obstacle":
        w = resolve_weights(config)
        prob = ObstacleProblem(weights=w, n=config.get("resolution") or 101,
                               max_sweeps=config.get("max_sweeps") or 4000,
                               safety=config.get("safety") or 0.9,
                               boundary_inset=config.get("inset") or 0.1)
        surface, log = solve(prob)
        surface.to_csv(out_dir / "surface.csv") if out_dir.exists() else None
        out_dir.mkdir(parents=True, exist_ok=True)
        surface.to_csv(out_dir / "surface.csv")
        (out_dir / "convergence.jsonl").write_text(log.to_json_lines() + "\n")
        dom = dominance_check(surface, w)
        result = {"converged": log.converged, "aborted": log.aborted,
                  "sweeps": len(log.sweeps),
                  "center_value": surface.value_at(0.5, 0.5),
                  "dominance_margin": dom.worst_margin,
                  "surface_csv": "surface.csv", "convergence_log": "convergence.jsonl"}
        _report(config, result, out_dir)
        if log.aborted:
            return EXIT_PRECISION
        return EXIT_OK

    # the remaining commands need a surface
    surface_id = config.get("surface")
    if not surface_id:
        raise ConfigError(f"command {command!r} needs --surface")
    surface = from_catalog(surface_id)
    w = resolve_weights(config)

    if command == "check-pdi":
        res = config.get("resolution") or 200
        report = check_pdi_grid(surface, w, resolution=(res, res),
                                tolerance=config.get("tolerance") or 1e-9)
        _report(config, json.loads(report.to_json()), out_dir)
        return EXIT_OK if report.feasible else EXIT_VIOLATION

    measure = parse_measure(config.get("measure") or "std")

    if command == "verify-ineq":
        f = parse_grid_function(config.get("f") or "random", rng, surface, "f")
        g = parse_grid_function(config.get("g") or "random", rng, surface, "g")
        res = inequality_gap(surface, f, g, w, measure,
                             nodes=config.get("nodes") or 160)
        scale = gap_scale(surface, f, g)
        tol = (config.get("tolerance") or 1e-6) * scale
        passed = res.gap >= -tol
        result = json.loads(res.to_json())
        result.update({"scale": scale, "passed": passed})
        if not passed:
            f.to_csv(out_dir / "witness_f.csv")
            g.to_csv(out_dir / "witness_g.csv")
            env = sup_convolve(surface, f, g, w)
            env.to_csv(out_dir / "witness_envelope.csv")
            result["witnesses"] = ["witness_f.csv", "witness_g.csv", "witness_envelope.csv"]
        _report(config, result, out_dir)
        return EXIT_OK if passed else EXIT_VIOLATION

    if command == "smooth-lhs":
        f = parse_grid_function(config.get("f") or "bump:height=1,width=1", rng, surface, "f")
        g = parse_grid_function(config.get("g") or "bump:height=1,width=1", rng, surface, "g")
        R = config.get("R") or 1e3
        alpha = config.get("alpha") or 0.9
        beta = config.get("beta") or 0.2
        lp = lp_smoothed_lhs(surface, f, g, w, R=R, alpha=alpha, beta=beta)
        direct = inequality_gap(surface, f, g, w, measure)
        from .gaussian import gaussian_quadrature_nodes
        env = sup_convolve(surface, f, g, w)
        xs, wts = gaussian_quadrature_nodes(measure, 2 * (config.get("nodes") or 160))
        power = R / (R - R ** alpha)
        matched = float(np.sum(wts * env(xs) ** power))
        rel = abs(lp - matched) / abs(matched)
        result = {"lp_smoothed": lp, "grid_sup_lhs": direct.lhs,
                  "matched_power_lhs": matched, "power": power,
                  "relative_mismatch": rel, "passed": rel <= 0.02}
        _report(config, result, out_dir)
        return EXIT_OK if rel <= 0.02 else EXIT_VIOLATION

    if command == "find-counterexample":
        ce = counterexample_search(surface, w, measure,
                                   budget=config.get("budget") or 100000,
                                   family=config.get("family") or "perturbative",
                                   seed=config.get("seed", 0))
        if ce is None:
            _report(config, {"found": False}, out_dir)
            return EXIT_OK
        out_dir.mkdir(parents=True, exist_ok=True)
        ce.f.to_csv(out_dir / "counterexample_f.csv")
        ce.g.to_csv(out_dir / "counterexample_g.csv")
        manifest = {"found": True, "family": ce.family,
                    "params": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                               for k, v in ce.params.items()},
                    "gap": ce.result.gap, "lhs": ce.result.lhs, "rhs": ce.result.rhs,
                    "evaluations": ce.evaluations,
                    "witnesses": ["counterexample_f.csv", "counterexample_g.csv"]}
        _report(config, manifest, out_dir)
        return EXIT_VIOLATION

    raise ConfigError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehrhard-lab",
        description="Numerical laboratory for sup-convolution functional inequalities")
    parser.add_argument("--config", help="JSON config file (overrides other flags)")
    sub = parser.add_subparsers(dest="command")

    def common(p, surface=True):
        if surface:
            p.add_argument("--surface", help="catalog id, e.g. ehrhard:a=0.5,b=0.5")
        p.add_argument("--weights", help="a,b")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory for reports")
        p.add_argument("--threads", type=int, default=None,
                       help="worker cap (EHRHARD_LAB_THREADS fallback); evaluation is vectorized")

    p = sub.add_parser("check-pdi", help="grid sweep of the PDI")
    common(p)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-9)

    p = sub.add_parser("verify-ineq", help="direct sup-convolution inequality check")
    common(p)
    p.add_argument("--f", dest="f", default="random")
    p.add_argument("--g", dest="g", default="random")
    p.add_argument("--measure", default="std")
    p.add_argument("--nodes", type=int, default=160)
    p.add_argument("--tolerance", type=float, default=1e-6)

    p = sub.add_parser("smooth-lhs", help="L^p smoothing consistency check")
    common(p)
    p.add_argument("--f", dest="f", default="bump:height=1,width=1")
    p.add_argument("--g", dest="g", default="bump:height=1,width=1")
    p.add_argument("--R", type=float, default=1e3)
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--measure", default="std")
    p.add_argument("--nodes", type=int, default=160)

    p = sub.add_parser("find-counterexample", help="search for violating test pairs")
    common(p)
    p.add_argument("--family", choices=("perturbative", "step", "random"),
                   default="perturbative")
    p.add_argument("--budget", type=int, default=100000)
    p.add_argument("--measure", default="std")

    p = sub.add_parser("audit-measure", help="necessary-condition audit of e^-V")
    common(p, surface=False)
    p.add_argument("--potential", default="gaussian")

    p = sub.add_parser("solve-obstacle", help="corner obstacle problem")
    common(p, surface=False)
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=4000)
    p.add_argument("--inset", type=float, default=0.1)
    p.add_argument("--safety", type=float, default=0.9)

    p = sub.add_parser("catalog", help="list catalog surfaces")
    common(p, surface=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if ns.config:
            config = parse_config(ns.config)
        else:
            if not ns.command:
                parser.print_help()
                return EXIT_USAGE
            config = {k: v for k, v in vars(ns).items()
                      if k != "config" and v is not None}
        code = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionError as exc:
        print(f"precision failure: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
