"""Blow-up boundary problems: data schedule, asymptotic truncation, the
mixed annulus problem and the constant-coefficient majorant."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from ..asymptotics import BlowupProfile, compute_h
from ..errors import ConfigurationError, DomainError, NonConvergenceError, ResolutionError
from ..karamata import KWeight
from .discrete import Discretization, newton
from .field import DiscreteField
from .geometry import Geometry, Grid
from .problem import BlowUp, Dirichlet, ProblemSpec

__all__ = [
    "Schedule",
    "AsymptoticBC",
    "make_grid",
    "solve_blowup",
    "solve_mixed",
    "constant_majorant",
]

log = logging.getLogger(__name__)

FIRST_CELL_FRACTION = 1e-5  # of d_core


@dataclass(frozen=True)
class Schedule:
    """Boundary data ``M_j = m0 * growth**j`` until the core settles.

    ``d_core`` defaults to a tenth of the domain diameter.
    """

    m0: float = 10.0
    growth: float = 2.0
    max_stages: int = 40
    d_core: Optional[float] = None
    tol_interior: float = 1e-6

    def __post_init__(self):
        if not (self.m0 > 0 and self.growth > 1 and self.max_stages >= 1 and self.tol_interior > 0):
            raise DomainError("schedule needs m0 > 0, growth > 1, max_stages >= 1, tol_interior > 0")

    def core(self, geometry: Geometry) -> float:
        return self.d_core if self.d_core is not None else 0.1 * geometry.diameter


@dataclass(frozen=True)
class AsymptoticBC:
    """Truncate at ``d = delta`` and impose ``xi0 * h(delta)``.

    ``delta`` defaults to 20 first cells of the grid.
    """

    delta: Optional[float] = None
    d_core: Optional[float] = None


def make_grid(spec: ProblemSpec, n: int = 2000, first_cell: Optional[float] = None,
              d_core: Optional[float] = None) -> Grid:
    """Grid graded toward the blow-up components (uniform if there are none).

    The first cell defaults to ``1e-5 * d_core``.
    """
    comps = spec.blowup_components
    if not comps:
        return Grid.uniform(spec.geometry, n)
    if first_cell is None:
        dc = d_core if d_core is not None else 0.1 * spec.geometry.diameter
        first_cell = FIRST_CELL_FRACTION * dc
    return Grid.graded(spec.geometry, n, first_cell, comps)


def _surrogate_disc(spec: ProblemSpec, grid: Grid, M: float) -> Discretization:
    sur = spec.dirichlet_surrogate(M)
    geom = sur.geometry
    vals = {c: sur.boundary[c].value for c in geom.components}
    if geom.kind == "ball":
        ends = (None, vals["outer"])
    elif geom.kind == "interval":
        ends = (vals["left"], vals["right"])
    else:
        ends = (vals["inner"], vals["outer"])
    return Discretization(sur, grid, ends)


def solve_blowup(
    spec: ProblemSpec,
    grid: Grid,
    mode: Union[Schedule, AsymptoticBC, None] = None,
    u_init=None,
    tol: float = 1e-10,
    keep_stages: bool = False,
) -> DiscreteField:
    """Large solution with blow-up on the spec's ``BlowUp`` components.

    ``Schedule`` mode raises the data on those components stage by stage,
    warm-starting each Newton solve, and stops once the relative sup-change
    on ``d >= d_core`` falls below ``tol_interior``.  ``AsymptoticBC`` mode
    solves once on ``d >= delta`` with the profile value at the cut.
    """
    if not spec.blowup_components:
        raise DomainError("spec has no blow-up components")
    mode = Schedule() if mode is None else mode
    if isinstance(mode, AsymptoticBC):
        return _solve_truncated(spec, grid, mode, tol)
    d = spec.distance(grid.nodes)
    d_core = mode.core(spec.geometry)
    core = d >= d_core
    if not np.any(core):
        raise ConfigurationError(f"no grid nodes with d >= d_core={d_core}")
    blow = np.zeros(grid.n, dtype=bool)
    for c in spec.blowup_components:
        blow[0 if spec.geometry.position(c) == grid.nodes[0] else -1] = True

    u = None if u_init is None else np.array(u_init, dtype=float)
    prev, trace, stages = None, [], []
    M = mode.m0
    for j in range(mode.max_stages):
        M = mode.m0 * mode.growth**j
        disc = _surrogate_disc(spec, grid, M)
        if u is not None:
            u = u.copy()
            u[blow] = M
        fld = newton(disc, u, tol)
        fld.distance = d
        u = fld.values
        if prev is None:
            gap = np.inf
        else:
            drop = prev - u
            if np.any(drop > 1e-10 * np.maximum(np.abs(u), 1.0)):
                i = int(np.argmax(drop))
                raise NonConvergenceError(
                    f"schedule lost monotonicity at stage {j}, node {i}",
                    {"stage": j, "node": i, "trace": trace})
            gap = _rel_gap(u[core], prev[core], u[core])
        trace.append({"stage": j, "M": M, "core_gap": gap, "newton_iterations": fld.iterations})
        if keep_stages:
            stages.append(u.copy())
        if gap < mode.tol_interior:
            fld.schedule_log = trace
            fld.meta.update(mode="schedule", d_core=d_core, M=M)
            if keep_stages:
                fld.meta["stages"] = stages
            return fld
        prev = u
    raise NonConvergenceError(
        f"schedule exhausted after {mode.max_stages} stages (last gap {trace[-1]['core_gap']:.3e})",
        {"trace": trace, "iterate": u})


def _solve_truncated(spec: ProblemSpec, grid: Grid, mode: AsymptoticBC, tol: float) -> DiscreteField:
    cell = grid.first_cell
    delta = 20.0 * cell if mode.delta is None else float(mode.delta)
    if delta < 2.0 * cell:
        raise ResolutionError(f"delta={delta} is below two grid cells ({2 * cell})")
    profile = BlowupProfile(spec.f, spec.k, spec.c)
    d = spec.distance(grid.nodes)
    keep = d >= delta
    idx = np.flatnonzero(keep)
    if idx.size < 10 or np.any(np.diff(idx) != 1):
        raise ResolutionError("truncated grid is too small or disconnected")
    sub = Grid(grid.nodes[keep], grid.grading, grid.ratio, 0.0)
    geom = spec.geometry
    ends = []
    for pos, i in ((0, idx[0]), (-1, idx[-1])):
        comp = [c for c in geom.components if geom.position(c) == grid.nodes[pos]] if not (
            geom.kind == "ball" and pos == 0) else []
        if geom.kind == "ball" and pos == 0:
            ends.append(None)
        elif comp and isinstance(spec.boundary[comp[0]], BlowUp):
            ends.append(profile.xi0 * compute_h(profile, float(d[i])))
        else:
            ends.append(spec.boundary[comp[0]].value)
    sur = spec.dirichlet_surrogate(1.0)
    disc = Discretization(sur, sub, tuple(ends))
    fld = newton(disc, None, tol)
    fld.distance = d[keep]
    fld.meta.update(mode="asymptotic_bc", delta=delta, d_core=(
        mode.d_core if mode.d_core is not None else 0.1 * geom.diameter))
    return fld


def _rel_gap(u, v, ref):
    """``max |u - v| / |ref|`` with a floor against nodes where ``ref`` vanishes."""
    den = np.maximum(np.abs(ref), 1e-14 * float(np.max(np.abs(ref))) + 1e-300)
    return float(np.max(np.abs(u - v) / den))


def _core_interpolant(fld: DiscreteField, lo: float):
    x = fld.nodes
    m = x >= lo
    return CubicSpline(x[m], fld.values[m])


def solve_mixed(
    spec: ProblemSpec,
    grid: Grid,
    schedule: Optional[Schedule] = None,
    offsets: Optional[list] = None,
    tol: float = 1e-10,
    order_tol: float = 1e-4,
    settle_tol: float = 1e-4,
):
    """Minimal and maximal solutions of the annulus problem with blow-up on
    the inner circle and ``u = 0`` on the outer one.

    The minimal solution comes from the data schedule on ``grid``.  The
    maximal one is the decreasing limit of large solutions on annuli with
    inner radius ``R0 + eps_n``; each is solved on its own graded grid and
    compared with the minimal solution on the core by cubic interpolation.
    The sequence stops once the core changes by less than ``settle_tol`` or
    the offset drops below the first grid cell; each member carries its
    own schedule noise, so ``settle_tol`` cannot go much below the
    schedule's ``tol_interior`` times ten.
    ``maximal.meta`` carries the core gap, the offsets and the trace.
    """
    geom = spec.geometry
    if geom.kind != "annulus":
        raise DomainError("the mixed problem lives on an annulus")
    if not (isinstance(spec.boundary["inner"], BlowUp) and isinstance(spec.boundary["outer"], Dirichlet)
            and spec.boundary["outer"].value == 0.0):
        raise DomainError("mixed problem needs blowup inner and dirichlet(0) outer")
    schedule = schedule or Schedule()
    d_core = schedule.core(geom)
    minimal = solve_blowup(spec, grid, schedule, tol=tol)
    xc, umin = minimal.core(d_core)
    if offsets is None:
        offsets = [0.5 * d_core * 0.5**n for n in range(24)]
    trace, prev, maximal, wc = [], None, None, None
    ref = dict(reference=geom, reference_components=("inner",))
    for eps in offsets:
        g = Geometry.annulus(geom.dim, geom.lo + eps, geom.hi)
        sub_spec = spec.replace(geometry=g, **ref)
        sub_grid = Grid.graded(g, grid.n, grid.first_cell, ("inner",))
        w = solve_blowup(sub_spec, sub_grid, schedule, tol=tol)
        wc = _core_interpolant(w, geom.lo + eps + 0.5 * d_core)(xc)
        below = _rel_gap(np.maximum(umin - wc, 0.0), 0.0, umin)
        if below > order_tol:
            raise NonConvergenceError(
                f"minimal exceeds the shrinking-domain solution by {below:.3e} at eps={eps}",
                {"trace": trace})
        change = np.inf if prev is None else _rel_gap(wc, prev, wc)
        trace.append({"eps": eps, "change": change, "gap": _rel_gap(wc, umin, umin)})
        maximal, prev = w, wc
        if change < settle_tol or eps < grid.first_cell:
            break
    else:
        log.warning("shrinking-domain sequence did not settle to %g", settle_tol)
    maximal.meta.update(core_nodes=xc, core_values=wc, core_gap=trace[-1]["gap"],
                        trace=trace, eps=trace[-1]["eps"])
    return minimal, maximal


def constant_majorant(
    spec: ProblemSpec,
    grid: Grid,
    schedule: Optional[Schedule] = None,
    boundary_value: Optional[float] = None,
    tol: float = 1e-10,
) -> DiscreteField:
    """Upper barrier from ``Δu + a⁺ u**p = h f(u) - r̄ - 1`` with ``h = min b``.

    With ``boundary_value`` the blow-up components get that Dirichlet value
    (use the final ``M`` of the run being bounded); otherwise the schedule
    is run.
    """
    x = grid.nodes
    b = spec.potential(x)
    inner = np.ones(x.size, dtype=bool)
    inner[-1] = False
    if spec.geometry.kind != "ball":
        inner[0] = False
    h_low = float(np.min(b[inner]))
    if not h_low > 0:
        raise DomainError("min b vanishes on the grid; add a positive lift")
    r_bar = float(np.max(spec.source_values(x)))
    forcing = r_bar + 1.0
    maj = ProblemSpec(
        geometry=spec.geometry, f=spec.f, boundary=spec.boundary,
        a=max(spec.a, 0.0), p=spec.p, c=h_low, k=KWeight.constant(),
        source=lambda z: np.full(np.shape(z), forcing),
    )
    if boundary_value is None:
        return solve_blowup(maj, grid, schedule, tol=tol)
    disc = _surrogate_disc(maj, grid, float(boundary_value))
    fld = newton(disc, None, tol)
    fld.meta.update(h_low=h_low, forcing=forcing)
    return fld
