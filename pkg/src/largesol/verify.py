"""Quantitative checks on computed large solutions.

Boundary-rate fits against ``xi0 * h(d)``, randomized comparison and
uniqueness suites, and sweeps over the coefficient ``a``.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .asymptotics import BlowupProfile, compute_h
from .errors import LargeSolError, NonConvergenceError, WindowError
from .karamata import aitken
from .solver import (
    DiscreteField,
    Grid,
    ProblemSpec,
    Schedule,
    solve_blowup,
    solve_dirichlet,
)

__all__ = [
    "RateReport",
    "ComparisonResult",
    "UniquenessResult",
    "SweepRow",
    "SweepResult",
    "fit_boundary_rate",
    "comparison_suite",
    "uniqueness_check",
    "sweep_a",
    "write_rate_csv",
    "write_sweep_csv",
    "RATE_COLUMNS",
    "SWEEP_COLUMNS",
]

log = logging.getLogger(__name__)

RATE_COLUMNS = ("d", "ratio")
SWEEP_COLUMNS = ("a", "converged", "fitted_xi", "interior_norm")
EXCLUDED_NODES = 2
MIN_WINDOW_NODES = 8


@dataclass
class RateReport:
    fitted_xi: float
    target_xi0: float
    relative_error: float
    window: tuple
    pointwise_ratios: list
    correction_decay: Optional[float]
    estimator: str
    tau: Optional[float] = None
    monotone: bool = True
    warnings: list = field(default_factory=list)

    def to_record(self) -> dict:
        return asdict(self)


def _fit_limit(d, y, z):
    """Extrapolate ``y`` to ``d -> 0``; ``z = log h(d)``.

    Returns ``(value, estimator, tau)``.
    """
    scale = abs(float(np.mean(y)))
    if float(np.ptp(y)) <= 1e-9 * scale:
        return float(np.mean(y)), "flat", None
    g = np.diff(y) / np.diff(z)
    zm = 0.5 * (z[1:] + z[:-1])
    tau = None
    if np.all(g > 0) or np.all(g < 0):
        tau = -float(np.polyfit(zm, np.log(np.abs(g)), 1)[0])
    if tau is not None and tau > 0.05 and np.isfinite(tau):
        X = np.exp(-tau * (z - z.max()))
        w = np.sqrt(1.0 / d)
        A = np.column_stack([np.ones_like(X), X]) * w[:, None]
        coef = np.linalg.lstsq(A, y * w, rcond=None)[0]
        return float(coef[0]), "regression", tau
    inner = y[:3][::-1]  # toward the boundary
    return float(aitken(inner)[-1]), "richardson", tau


def fit_boundary_rate(
    fld: DiscreteField,
    profile: BlowupProfile,
    window: Sequence[float] = (0.01, 0.1),
    monotone_tol: float = 1e-6,
) -> RateReport:
    """Fit ``lim u / h(d)`` over nodes with ``d`` in ``window``.

    The two nodes nearest the blow-up boundary are never used.  The limit is
    a weighted regression of ``u/h`` on ``h**-tau``, with ``tau`` read off
    the decay of successive differences; flat ratios use their mean and
    irregular ones fall back to a Richardson (Aitken) step on the three
    innermost nodes.
    """
    d_min, d_max = map(float, window)
    if not 0 < d_min < d_max:
        raise WindowError(f"window must satisfy 0 < d_min < d_max, got {window}")
    cell = fld.grid.first_cell
    if d_min < 2.0 * cell:
        raise WindowError(f"d_min={d_min} is below two first cells ({2 * cell})")
    d = np.asarray(fld.distance, dtype=float)
    u = np.asarray(fld.values, dtype=float)
    pos = np.flatnonzero(d > 0)
    near = pos[np.argsort(d[pos])][:EXCLUDED_NODES]
    mask = (d >= d_min) & (d <= d_max)
    mask[near] = False
    idx = np.flatnonzero(mask)
    if idx.size < MIN_WINDOW_NODES:
        raise WindowError(f"window {window} holds {idx.size} nodes, need {MIN_WINDOW_NODES}")
    idx = idx[np.argsort(d[idx], kind="stable")]
    dw = d[idx]
    h = np.array([compute_h(profile, float(t)) for t in dw])
    y = u[idx] / h
    z = np.log(h)
    value, estimator, tau = _fit_limit(dw, y, z)
    target = profile.xi0

    warnings = []
    steps = np.diff(y)
    big = np.abs(steps) > monotone_tol * np.abs(y[1:])
    monotone = not (np.any(steps[big] > 0) and np.any(steps[big] < 0))
    if not monotone:
        warnings.append("ratios are not monotone in d")

    dev = np.abs(y - target)
    ok = dev > 1e-14 * target
    decay = float(np.polyfit(np.log(dw[ok]), np.log(dev[ok]), 1)[0]) if ok.sum() >= 3 else None
    return RateReport(
        fitted_xi=value,
        target_xi0=target,
        relative_error=abs(value - target) / target,
        window=(d_min, d_max),
        pointwise_ratios=[(float(a), float(b)) for a, b in zip(dw, y)],
        correction_decay=decay,
        estimator=estimator,
        tau=tau,
        monotone=monotone,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# comparison suite


@dataclass
class ComparisonResult:
    passed: bool
    trials: int
    passes: int
    skipped: list
    counterexamples: list


def _ordered_pair(rng, spec: ProblemSpec):
    comps = spec.geometry.components
    phi2 = {c: float(rng.uniform(0.1, 5.0)) for c in comps}
    equal = rng.uniform() < 0.2
    phi1 = {c: v + (0.0 if equal else float(rng.uniform(0.0, 3.0))) for c, v in phi2.items()}
    amp = 0.0 if equal else float(rng.uniform(0.0, 2.0))
    omega, shift, theta = rng.uniform(0.5, 6.0), rng.uniform(0, 2 * np.pi), rng.uniform()
    base = spec.source

    def extra(x, s):
        return s * amp * (1.0 + 0.5 * np.sin(omega * np.asarray(x) + shift))

    def make(s):
        if base is None:
            return lambda x: extra(x, s)
        return lambda x: base(x) + extra(x, s)

    return phi1, phi2, make(1.0), make(theta)


def _compare_trial(spec, grid, trial, tol):
    phi1, phi2, r1, r2 = trial
    try:
        u1 = solve_dirichlet(spec.replace(source=r1), grid, phi1).values
        u2 = solve_dirichlet(spec.replace(source=r2), grid, phi2).values
    except LargeSolError as exc:
        return "skipped", str(exc)
    excess = float(np.max((u2 - u1) / np.maximum(np.abs(u1), 1.0)))
    if excess > tol:
        return "fail", {"phi1": phi1, "phi2": phi2, "excess": excess, "u1": u1, "u2": u2}
    return "pass", excess


def comparison_suite(
    spec: ProblemSpec,
    grid: Grid,
    trials: int = 100,
    seed: Optional[int] = 0,
    tol: float = 1e-10,
    workers: int = 1,
) -> ComparisonResult:
    """Randomized ordered data ``Phi1 >= Phi2``, ``r1 >= r2``; expects ``u1 >= u2``.

    About a fifth of the trials use identical data.  Blow-up components are
    replaced by Dirichlet data.  Non-convergent trials are skipped.
    """
    base = spec.dirichlet_surrogate(1.0)
    rng = np.random.default_rng(seed)
    draws = [_ordered_pair(rng, base) for _ in range(trials)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda t: _compare_trial(base, grid, t, tol), draws))
    skipped = [(i, r[1]) for i, r in enumerate(results) if r[0] == "skipped"]
    for i, msg in skipped:
        log.warning("comparison trial %d skipped: %s", i, msg)
    bad = [r[1] for r in results if r[0] == "fail"]
    passes = sum(r[0] == "pass" for r in results)
    return ComparisonResult(not bad, trials, passes, skipped, bad)


# ---------------------------------------------------------------------------
# uniqueness


@dataclass
class UniquenessResult:
    max_difference: float
    runs: list
    failures: list


def uniqueness_check(
    spec: ProblemSpec,
    grid: Grid,
    n_inits: int = 5,
    seed: Optional[int] = 0,
    schedule: Optional[Schedule] = None,
) -> UniquenessResult:
    """Schedule solves from random positive starts; returns the largest
    pairwise difference, relative to ``max(|u|, 1)`` per node."""
    rng = np.random.default_rng(seed)
    fields, runs, failures = [], [], []
    for i in range(n_inits):
        init = float(rng.uniform(0.5, 5.0)) * np.exp(rng.normal(0.0, 1.0, grid.n))
        try:
            fld = solve_blowup(spec, grid, schedule, u_init=init)
        except NonConvergenceError as exc:
            failures.append({"run": i, "error": str(exc)})
            continue
        fields.append(fld.values)
        runs.append({"run": i, "stages": len(fld.schedule_log), "residual": fld.residual_norm})
    diff = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            den = np.maximum(np.abs(fields[i]), 1.0)
            diff = max(diff, float(np.max(np.abs(fields[i] - fields[j]) / den)))
    return UniquenessResult(diff, runs, failures)


# ---------------------------------------------------------------------------
# sweep over a


@dataclass
class SweepRow:
    a: float
    converged: bool
    fitted_xi: float
    interior_norm: float
    error: str = ""


@dataclass
class SweepResult:
    rows: list
    all_converged: bool
    xi_spread: float
    ordered: bool
    passed: bool
    fields: dict = field(default_factory=dict, repr=False)


def sweep_a(
    spec: ProblemSpec,
    a_values: Sequence[float],
    grid: Grid,
    window: Sequence[float] = (0.01, 0.1),
    schedule: Optional[Schedule] = None,
    xi_tol: float = 0.02,
    profile: Optional[BlowupProfile] = None,
    workers: int = 1,
) -> SweepResult:
    """Solve and fit the rate for each ``a``.

    Passes when every row converges, the fitted rates agree within
    ``xi_tol`` (``(max - min) / min``) and the core values increase with
    ``a`` nodewise.  ``interior_norm`` is the sup of ``u`` on the core.
    """
    a_values = [float(a) for a in a_values]
    if not all(math.isfinite(a) for a in a_values):
        raise ValueError("a values must be finite")
    profile = profile or BlowupProfile(spec.f, spec.k, spec.c)
    schedule = schedule or Schedule()
    d_core = schedule.core(spec.geometry)

    def run(a):
        try:
            fld = solve_blowup(spec.replace(a=a), grid, schedule)
            rep = fit_boundary_rate(fld, profile, window)
        except LargeSolError as exc:
            return SweepRow(a, False, math.nan, math.nan, str(exc)), None
        core = fld.distance >= d_core
        return SweepRow(a, True, rep.fitted_xi, float(np.max(fld.values[core]))), fld

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        out = list(pool.map(run, a_values))
    rows = [r for r, _ in out]
    fields = {r.a: f for r, f in out if f is not None}
    ok = [r for r in rows if r.converged]
    all_conv = len(ok) == len(rows)
    xis = np.array([r.fitted_xi for r in ok])
    spread = float((xis.max() - xis.min()) / xis.min()) if xis.size else math.nan
    ordered = True
    keys = sorted(fields)
    for lo, hi in zip(keys, keys[1:]):
        u_lo, u_hi = fields[lo].values, fields[hi].values
        core = fields[lo].distance >= d_core
        if np.any(u_lo[core] > u_hi[core] + 1e-10 * np.maximum(np.abs(u_hi[core]), 1.0)):
            ordered = False
    passed = all_conv and spread < xi_tol and ordered
    return SweepResult(rows, all_conv, spread, ordered, passed, fields)


# ---------------------------------------------------------------------------
# exports


def write_rate_csv(path, report: RateReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS)
        for d, r in report.pointwise_ratios:
            w.writerow([repr(d), repr(r)])


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(r.a), int(r.converged), repr(r.fitted_xi), repr(r.interior_norm)])
