"""Command line front end.

Three subcommands drive the library from JSON configs:

``freqlab modulus``     classify a modulus of continuity and check the
                        transform hypotheses
``freqlab solve``       one Dirichlet solve with a frequency profile
``freqlab experiment``  scenario runs or a whole sweep

Exit codes: 0 success (including branch verdicts), 1 scenario failure
(margins violated or an admissibility regime error), 2 usage or
configuration error, 3 solver failure.  Set FREQLAB_CACHE=0 to disable
the in-process operator cache.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .experiments import (
    RegimeError,
    ScenarioConfig,
    ScenarioError,
    Verdict,
    default_config,
    default_sweep,
    run_scenario,
)
from .experiments.base import _modulus_from_spec, build_boundary, build_field
from .frequency import almgren_frequency
from .io import (
    SCHEMA_VERSION,
    ConfigError,
    atomic_write_text,
    config_hash,
    load_config,
    write_csv,
    write_grid,
    write_json,
)
from .modulus import (
    check_phi_integrable,
    check_submultiplicative_psi,
    classify_osgood,
    eval_phi,
)
from .solver import PolarGrid, SolverError, solve_dirichlet
from .svg import render_line_plot, render_margin_plot

__all__ = ["main"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

# branch verdicts count as success: the run established that the
# estimate's hypotheses do not apply, which is a reportable outcome
_PASSING = {
    Verdict.CONSISTENT,
    Verdict.ALTERNATIVE_ONE,
    Verdict.HYPOTHESIS_UNMET,
    Verdict.SKIPPED,
}


@dataclasses.dataclass
class RunManifest:
    """Index of one CLI invocation.  The data files it lists are
    byte-reproducible from (config, seed, version); the manifest itself
    records wall-clock time and is not."""

    command: str
    config_hash: str
    seed: int
    resolutions: list
    outputs: list
    version: str
    wall_clock_s: float

    def write(self, out_dir: str) -> str:
        return write_json(os.path.join(out_dir, "manifest.json"),
                          dataclasses.asdict(self))


def _parse_resolution(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            "resolution must be N_r,N_theta (for example 65,128)")
    try:
        n_r, n_theta = int(parts[0]), int(parts[1])
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None
    return n_r, n_theta


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqlab",
        description="frequency-function laboratory for divergence-form "
                    "elliptic equations")
    parser.add_argument("--version", action="version",
                        version=f"freqlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", default="out", metavar="DIR",
                        help="output directory (default: out)")
    shared.add_argument("--seed", type=int, default=None, metavar="K",
                        help="override the config seed")
    shared.add_argument("--resolution", type=_parse_resolution,
                        default=None, metavar="N_R,N_THETA",
                        help="override the grid resolution")
    shared.add_argument("--refine", action="store_true",
                        help="double the resolution and emit deltas")

    p_mod = sub.add_parser("modulus", parents=[shared],
                           help="classify a modulus of continuity")
    p_mod.add_argument("--config", required=True, metavar="PATH")

    p_solve = sub.add_parser("solve", parents=[shared],
                             help="solve one Dirichlet problem")
    p_solve.add_argument("--config", required=True, metavar="PATH")

    p_exp = sub.add_parser("experiment", parents=[shared],
                           help="run scenarios or a sweep")
    p_exp.add_argument("scenarios", nargs="*", metavar="SCENARIO",
                       help="registered scenario names; none runs the "
                            "default sweep")
    p_exp.add_argument("--config", default=None, metavar="PATH",
                       help="scenario or sweep manifest JSON")
    p_exp.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="parallel scenario jobs (default: 1)")
    return parser


def _require(doc: dict, field: str, path: str):
    if field not in doc:
        raise ConfigError(f"{path}: missing required field {field!r}")
    return doc[field]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# -- modulus ---------------------------------------------------------------


def cmd_modulus(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    spec = _require(doc, "modulus", args.config)
    c_m = float(doc.get("c_m", 100.0))
    try:
        m = _modulus_from_spec(spec)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"{args.config}: bad modulus block: {err}") from err

    osgood = classify_osgood(m)
    integ = check_phi_integrable(m)
    sub = check_submultiplicative_psi(m, c_m)
    report = {
        "schema": SCHEMA_VERSION,
        "modulus": m.to_config(),
        "verdict": osgood.value,
        "phi_integrable": {
            "finite": bool(integ.finite),
            "value": float(integ.value),
        },
        "psi_submultiplicative": {
            "holds": bool(sub.holds),
            "constant": float(sub.constant),
            "worst_ratio": float(sub.worst_ratio),
            "worst_pair": _plain(list(sub.worst_pair)),
        },
    }

    t = np.logspace(-6, 0, 121)
    omega = np.asarray(m.omega(t), dtype=float)
    phi = np.asarray(eval_phi(m, t), dtype=float)
    os.makedirs(args.out, exist_ok=True)
    outputs = [
        write_json(os.path.join(args.out, "modulus_report.json"), report),
        write_csv(os.path.join(args.out, "modulus_table.csv"),
                  ["t", "omega", "phi"],
                  zip(t, omega, phi)),
        atomic_write_text(
            os.path.join(args.out, "modulus.svg"),
            render_line_plot(
                [("omega(t)", t, omega), ("phi(t)", t, phi)],
                title=f"modulus {spec.get('kind', '?')}: {osgood.value}",
                x_label="t", y_label="value")),
    ]
    RunManifest("modulus", config_hash(doc), int(doc.get("seed", 0)),
                [], _relative(outputs, args.out), __version__,
                time.monotonic() - t0).write(args.out)
    print(f"modulus verdict: {osgood.value}")
    return EXIT_OK


def _relative(paths, root):
    return [os.path.relpath(p, root) for p in paths]


# -- solve -----------------------------------------------------------------


def cmd_solve(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    grid_spec = _require(doc, "grid", args.config)
    boundary_spec = _require(doc, "boundary", args.config)
    field_spec = doc.get("field", {"kind": "identity"})
    seed = int(doc.get("seed", 0)) if args.seed is None else args.seed
    profile_spec = doc.get("profile", {})
    r_lo = float(profile_spec.get("r_lo", 0.2))
    r_hi = float(profile_spec.get("r_hi", 0.9))
    if not 0.0 < r_lo < r_hi <= 1.0:
        raise ConfigError(
            f"{args.config}: profile window [{r_lo}, {r_hi}] is invalid")

    n_r = int(_require(grid_spec, "n_r", args.config))
    n_theta = int(_require(grid_spec, "n_theta", args.config))
    if args.resolution is not None:
        n_r, n_theta = args.resolution
    r_min = grid_spec.get("r_min")
    try:
        f = build_field(field_spec)
        data = build_boundary(boundary_spec, seed)
    except (ScenarioError, KeyError, ValueError) as err:
        raise ConfigError(f"{args.config}: {err}") from err

    os.makedirs(args.out, exist_ok=True)
    outputs = []

    def one_solve(tag: str, nr: int, nt: int):
        grid = PolarGrid.disk(nr, nt,
                              r_min=None if r_min is None else float(r_min))
        u = solve_dirichlet(f, 1.0, data, grid)
        radii = grid.radii[(grid.radii >= r_lo) & (grid.radii <= r_hi)]
        prof = almgren_frequency(u, f, radii=radii)
        order = np.argsort(prof.radii)
        outputs.append(write_grid(
            os.path.join(args.out, f"solution{tag}.grid"), u))
        outputs.append(write_csv(
            os.path.join(args.out, f"profile{tag}.csv"),
            ["r", "D", "H", "N"],
            zip(prof.radii[order], prof.D[order], prof.H[order],
                prof.N[order])))
        outputs.append(atomic_write_text(
            os.path.join(args.out, f"profile{tag}.svg"),
            render_line_plot(
                [("N(r)", prof.radii[order], prof.N[order])],
                title=f"frequency profile ({nr}x{nt})",
                x_label="r", y_label="N")))
        return u, prof.radii[order], prof.N[order]

    try:
        u, base_r, base_n = one_solve("", n_r, n_theta)
        report = {
            "schema": SCHEMA_VERSION,
            "residual_norm": float(u.residual_norm),
            "iterations": int(u.iterations),
            "grid": {"n_r": n_r, "n_theta": n_theta},
            "profile_window": [r_lo, r_hi],
        }
        resolutions = [[n_r, n_theta]]
        if args.refine:
            _, fine_r, fine_n = one_solve(
                "_refined", 2 * (n_r - 1) + 1, 2 * n_theta)
            deltas = np.interp(base_r, fine_r, fine_n) - base_n
            report["refinement"] = {
                "max_abs_delta_N": float(np.max(np.abs(deltas))),
                "deltas": _plain(deltas),
            }
            resolutions.append([2 * (n_r - 1) + 1, 2 * n_theta])
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER

    outputs.append(write_json(os.path.join(args.out, "solve_report.json"),
                              report))
    RunManifest("solve", config_hash(doc), seed, resolutions,
                _relative(outputs, args.out), __version__,
                time.monotonic() - t0).write(args.out)
    print(f"solved {n_r}x{n_theta}; N({base_r[-1]:.3g}) = {base_n[-1]:.6g}")
    return EXIT_OK


# -- experiment ------------------------------------------------------------


def _experiment_configs(args) -> list:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.resolution is not None:
        overrides["n_r"], overrides["n_theta"] = args.resolution

    if args.config is not None and args.scenarios:
        raise ConfigError(
            "give either scenario names or --config, not both")
    if args.config is not None:
        doc = load_config(args.config)
        if "sweep" in doc:
            entries = doc["sweep"]
            if not isinstance(entries, list) or not entries:
                raise ConfigError(
                    f"{args.config}: 'sweep' must be a non-empty list")
        else:
            entries = [{k: v for k, v in doc.items() if k != "schema"}]
        configs = []
        for entry in entries:
            if not isinstance(entry, dict) or "scenario" not in entry:
                raise ConfigError(
                    f"{args.config}: each sweep entry needs a 'scenario'")
            name = entry["scenario"]
            merged = dict(entry)
            merged.update(overrides)
            base = default_config(name).to_dict()
            base.update(merged)
            configs.append(ScenarioConfig.from_dict(base))
        return configs
    if args.scenarios:
        return [default_config(name, **overrides)
                for name in args.scenarios]
    return default_sweep(**overrides)


def _run_one(cfg: ScenarioConfig) -> dict:
    try:
        report = run_scenario(cfg)
    except RegimeError as err:
        return {"scenario": cfg.scenario, "status": "regime_error",
                "message": str(err), "max_radius": float(err.max_radius)}
    except ScenarioError as err:
        return {"scenario": cfg.scenario, "status": "scenario_error",
                "message": str(err)}
    except SolverError as err:
        return {"scenario": cfg.scenario, "status": "solver_error",
                "message": str(err)}
    return {"scenario": cfg.scenario, "status": "report", "report": report}


def cmd_experiment(args) -> int:
    t0 = time.monotonic()
    try:
        configs = _experiment_configs(args)
    except (ScenarioError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.refine:
        configs = [dataclasses.replace(c, n_r=2 * (c.n_r - 1) + 1,
                                       n_theta=2 * c.n_theta)
                   for c in configs]

    jobs = max(1, args.jobs)
    if jobs == 1:
        outcomes = [_run_one(c) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, configs))

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    summary_rows = []
    summary = {"schema": SCHEMA_VERSION, "scenarios": []}
    seen: dict = {}
    exit_code = EXIT_OK
    for cfg, outcome in zip(configs, outcomes):
        name = cfg.scenario
        seen[name] = seen.get(name, 0) + 1
        stem = name if seen[name] == 1 else f"{name}-{seen[name]}"
        if outcome["status"] == "report":
            report = outcome["report"]
            doc = report.to_dict()
            doc["schema"] = SCHEMA_VERSION
            doc["config"] = cfg.to_dict()
            outputs.append(write_json(
                os.path.join(args.out, f"{stem}.report.json"), doc))
            outputs.append(write_csv(
                os.path.join(args.out, f"{stem}.margins.csv"),
                ["name", "radius", "lhs", "rhs", "margin",
                 "refined_margin"],
                [(m.name, m.radius, m.lhs, m.rhs, m.margin,
                  m.refined_margin) for m in report.margins]))
            outputs.append(atomic_write_text(
                os.path.join(args.out, f"{stem}.margins.svg"),
                render_margin_plot(report)))
            verdict = report.verdict.value
            fitted = {k: v.value for k, v in report.fitted.items()}
            if report.verdict not in _PASSING:
                exit_code = max(exit_code, EXIT_FAILED)
            worst = min((m.margin for m in report.margins), default=0.0)
            summary_rows.append(
                (name, verdict, len(report.margins), worst,
                 len(report.violations)))
            summary["scenarios"].append({
                "scenario": name, "verdict": verdict,
                "fitted_constants": fitted,
                "violations": report.violations,
                "warnings": report.warnings,
            })
            line = f"{name:14s} {verdict}"
            if report.violations:
                line += f"  ({len(report.violations)} violations)"
            print(line)
        else:
            outputs.append(write_json(
                os.path.join(args.out, f"{stem}.error.json"),
                {"schema": SCHEMA_VERSION, **outcome}))
            summary_rows.append(
                (name, outcome["status"], 0, 0.0, 1))
            summary["scenarios"].append(outcome)
            print(f"{name:14s} {outcome['status']}: {outcome['message']}",
                  file=sys.stderr)
            if outcome["status"] == "solver_error":
                exit_code = max(exit_code, EXIT_SOLVER)
            elif outcome["status"] == "scenario_error":
                exit_code = max(exit_code, EXIT_USAGE)
            else:
                exit_code = max(exit_code, EXIT_FAILED)

    outputs.append(write_json(
        os.path.join(args.out, "sweep_summary.json"), summary))
    outputs.append(write_csv(
        os.path.join(args.out, "sweep_summary.csv"),
        ["scenario", "verdict", "rows", "worst_margin", "violations"],
        summary_rows))
    RunManifest(
        "experiment",
        config_hash([c.to_dict() for c in configs]),
        args.seed if args.seed is not None else 0,
        sorted({(c.n_r, c.n_theta) for c in configs}),
        _relative(outputs, args.out), __version__,
        time.monotonic() - t0).write(args.out)
    return exit_code


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code not in (0, None) else 0
    try:
        if args.command == "modulus":
            return cmd_modulus(args)
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_experiment(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
