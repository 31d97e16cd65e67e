"""Command-line front end.

Each subcommand runs one mode of an :class:`ExperimentConfig` and writes
``report.json`` plus the mode's data files into the output directory
(``--out``, then the config's ``output``, then ``$LARGESOL_OUT``, then
``./largesol-out``).  Exit status: 0 pass, 1 failed check or
non-convergence, 2 configuration error.

Data files: ``profile.dat`` (t, h), ``field.dat`` (x, d, u),
``schedule.csv`` (stage, M, core_gap, newton_iterations), ``rate.csv``
(d, ratio), ``sweep.csv`` (a, converged, fitted_xi, interior_norm).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import pydantic
import scipy
import yaml

from . import __version__
from .asymptotics import BlowupProfile, tabulate_profile, write_profile
from .config import MODES, ExperimentConfig, load_config, parse_nonlinearity
from .errors import LargeSolError, NonConvergenceError
from .nonlinearity import keller_osserman
from .solver import solve_blowup, solve_dirichlet, solve_mixed, write_field, write_schedule_log
from .verify import fit_boundary_rate, sweep_a, write_rate_csv, write_sweep_csv

__all__ = ["main", "run", "build_parser", "ENV_OUT"]

ENV_OUT = "LARGESOL_OUT"
log = logging.getLogger("largesol")


class _ConfigError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _spec_and_grid(cfg: ExperimentConfig):
    try:
        spec = cfg.problem.build()
        grid = cfg.grid.build(spec, cfg.schedule.d_core)
        schedule = cfg.schedule.build()
    except (LargeSolError, ValueError) as exc:
        raise _ConfigError(str(exc)) from exc
    return spec, grid, schedule


def _profile(cfg, out):
    p = cfg.problem
    try:
        prof = BlowupProfile(p.f.build(), p.potential.k.build(), p.potential.c)
    except (LargeSolError, ValueError) as exc:
        raise _ConfigError(str(exc)) from exc
    t, h = tabulate_profile(prof, cfg.profile.t_min, cfg.profile.t_max, cfg.profile.per_decade)
    write_profile(out / "profile.dat", t, h)
    return True, {"xi0": prof.xi0, "rho": prof.rho, "ell1": prof.ell1, "points": len(t)}


def _solve(cfg, out):
    spec, grid, schedule = _spec_and_grid(cfg)
    if spec.blowup_components:
        fld = solve_blowup(spec, grid, schedule, tol=cfg.tolerances.newton)
        write_schedule_log(out / "schedule.csv", fld.schedule_log)
    else:
        fld = solve_dirichlet(spec, grid, tol=cfg.tolerances.newton)
    write_field(out / "field.dat", fld)
    outcome = {"residual_norm": fld.residual_norm, "iterations": fld.iterations, "nodes": grid.n}
    passed = True
    if cfg.reference is not None:
        exact = np.polyval(np.asarray(cfg.reference.polynomial[::-1], dtype=float), fld.nodes)
        err = float(np.max(np.abs(fld.values - exact)))
        passed = err < cfg.tolerances.reference
        outcome["reference_error"] = err
    return passed, outcome


def _rate_outcome(spec, fld, cfg, out, name="rate.csv"):
    prof = BlowupProfile(spec.f, spec.k, spec.c)
    rep = fit_boundary_rate(fld, prof, cfg.fit.window)
    write_rate_csv(out / name, rep)
    rec = rep.to_record()
    rec.pop("pointwise_ratios")
    return rep.relative_error < cfg.tolerances.rate, rec


def _verify_rate(cfg, out):
    spec, grid, schedule = _spec_and_grid(cfg)
    fld = solve_blowup(spec, grid, schedule, tol=cfg.tolerances.newton)
    write_field(out / "field.dat", fld)
    write_schedule_log(out / "schedule.csv", fld.schedule_log)
    return _rate_outcome(spec, fld, cfg, out)


def _sweep(cfg, out):
    spec, grid, schedule = _spec_and_grid(cfg)
    res = sweep_a(spec, cfg.sweep.a_values, grid, cfg.fit.window, schedule, cfg.tolerances.rate)
    write_sweep_csv(out / "sweep.csv", res.rows)
    return res.passed, {
        "rows": [vars(r) for r in res.rows], "all_converged": res.all_converged,
        "xi_spread": res.xi_spread, "ordered": res.ordered,
    }


def _ko(cfg, out):
    res = keller_osserman(cfg.problem.f.build())
    return True, {"f": cfg.problem.f.model_dump(), "classification": res.status,
                  "algebraic_decay": res.algebraic_decay}


def _mixed(cfg, out):
    spec, grid, schedule = _spec_and_grid(cfg)
    mn, mx = solve_mixed(spec, grid, schedule, tol=cfg.tolerances.newton)
    write_field(out / "field_minimal.dat", mn)
    write_field(out / "field_maximal.dat", mx)
    ok_rate, rate = _rate_outcome(spec, mn, cfg, out)
    gap = mx.meta["core_gap"]
    return ok_rate and gap < cfg.tolerances.mixed, {"core_gap": gap, "eps": mx.meta["eps"], "rate": rate}


_RUNNERS = {
    "profile": _profile, "solve": _solve, "verify-rate": _verify_rate,
    "sweep": _sweep, "ko-check": _ko, "mixed": _mixed,
}


def _output_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output or os.environ.get(ENV_OUT) or "largesol-out")


def run(cfg: ExperimentConfig) -> int:
    """Run ``cfg.mode``; writes artifacts and returns the exit status."""
    out = _output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "header": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "versions": {"largesol": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "pydantic": pydantic.VERSION, "python": sys.version.split()[0]},
        },
        "config": cfg.model_dump(mode="json"),
    }
    try:
        passed, outcome = _RUNNERS[cfg.mode](cfg, out)
        status = 0 if passed else 1
    except _ConfigError as exc:
        passed, outcome, status = False, {"config_error": str(exc)}, 2
    except NonConvergenceError as exc:
        passed, outcome, status = False, {"error": str(exc), "report": exc.report}, 1
    except LargeSolError as exc:
        passed, outcome, status = False, {"error": str(exc)}, 1
    report.update(outcome=outcome, passed=passed, exit_status=status)
    with open(out / "report.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("%s: %s (exit %d)", cfg.mode, "pass" if passed else "fail", status)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="largesol", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", type=Path, help="YAML experiment file")
        p.add_argument("--a", type=float, help="override problem.a")
        p.add_argument("--grid-n", type=int, help="override grid.n")
        p.add_argument("--out", type=str, help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized suites")
        p.add_argument("--f", type=str, help="override problem.f, e.g. power:2, linear, exponential")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.model_dump()
    given = {
        ("mode",): args.mode,
        ("problem", "a"): args.a,
        ("grid", "n"): args.grid_n,
        ("output",): args.out,
        ("seed",): args.seed,
    }
    if args.f is not None:
        given[("problem", "f")] = parse_nonlinearity(args.f).model_dump()
    for path, value in given.items():
        if value is None:
            continue
        node = data
        for key in path[:-1]:
            node = node[key]
        old = node[path[-1]]
        if args.config is not None and old != value and path != ("output",):
            log.warning("override %s=%r replaces config value %r", ".".join(path), value, old)
        node[path[-1]] = value
    return ExperimentConfig.model_validate(data)


def _format_validation(exc: pydantic.ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
        cfg = _apply_overrides(cfg, args)
    except pydantic.ValidationError as exc:
        print(f"configuration error:\n{_format_validation(exc)}", file=sys.stderr)
        return 2
    except (OSError, yaml.YAMLError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    status = run(cfg)
    if status == 2:
        print("configuration error: see report.json", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
