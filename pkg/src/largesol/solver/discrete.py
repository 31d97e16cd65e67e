"""Finite differences, damped Newton and monotone iteration.

Unknowns live on every grid node.  Interior rows carry

    L_h u + a u**p - b f(u) + r,

with ``L_h`` the three-point nonuniform stencil for ``u''`` (plus the
radial term ``(N-1)/r u'``), and boundary rows carry ``u - Phi``.  The
centre of a ball uses the symmetric ghost node, ``N * 2 (u1 - u0) / h**2``.
"""

from __future__ import annotations

import logging
from typing import Mapping, Optional

import numpy as np
from scipy.linalg import solve_banded

from ..errors import (
    BracketError,
    DomainError,
    NonConvergenceError,
    PositivityError,
)
from .field import DiscreteField
from .geometry import Grid
from .problem import BlowUp, ProblemSpec

__all__ = [
    "Discretization",
    "assemble_residual",
    "solve_dirichlet",
    "monotone_iteration",
]

log = logging.getLogger(__name__)

U_FLOOR = 1e-12
MAX_HALVINGS = 40


class Discretization:
    """Stencils, coefficients and boundary rows of one problem on one grid.

    ``ends`` gives the Dirichlet values at the first and last node; ``None``
    at the first node of a ball grid starting at ``r = 0`` selects the
    symmetry row.
    """

    def __init__(self, spec: ProblemSpec, grid: Grid, ends):
        x = grid.nodes
        self.spec, self.grid = spec, grid
        n = x.size
        hm = np.diff(x)[:-1]
        hp = np.diff(x)[1:]
        lo = 2.0 / (hm * (hm + hp))
        di = -2.0 / (hm * hp)
        up = 2.0 / (hp * (hm + hp))
        geom = spec.geometry
        if geom.radial and geom.dim > 1:
            w = (geom.dim - 1) / x[1:-1]
            lo = lo - w * hp / (hm * (hm + hp))
            di = di + w * (hp - hm) / (hm * hp)
            up = up + w * hm / (hp * (hm + hp))
        self.lower = np.zeros(n)
        self.diag = np.zeros(n)
        self.upper = np.zeros(n)
        self.lower[1:-1], self.diag[1:-1], self.upper[1:-1] = lo, di, up

        left, right = ends
        self.symmetric = left is None
        if self.symmetric:
            if not (geom.kind == "ball" and x[0] == 0.0):
                raise DomainError("symmetry row only applies at the centre of a ball")
            h1 = x[1] - x[0]
            self.diag[0] = -2.0 * geom.dim / h1**2
            self.upper[0] = 2.0 * geom.dim / h1**2
        self.interior = np.ones(n, dtype=bool)
        self.interior[-1] = False
        if not self.symmetric:
            self.interior[0] = False
        self.phi = np.zeros(n)
        self.phi[0] = 0.0 if left is None else float(left)
        self.phi[-1] = float(right)
        if np.any(self.phi < 0):
            raise DomainError("boundary values must be >= 0")

        self.b = np.asarray(spec.potential(x), dtype=float)
        self.r = spec.source_values(x)
        bi = self.b[self.interior]
        if np.any(bi < 0) or not np.all(np.isfinite(bi)):
            raise DomainError("potential b must be finite and nonnegative")
        if not np.any(bi > 0):
            raise DomainError("potential b vanishes identically")

    # pieces -------------------------------------------------------------
    def laplacian(self, u):
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def _check(self, u):
        bad = np.flatnonzero(self.interior & ~(u >= 0))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"u must be >= 0 at interior nodes; node {i} (x={self.grid.nodes[i]!r}) has u={u[i]!r}")

    def residual(self, u, with_scale=False):
        u = np.asarray(u, dtype=float)
        self._check(u)
        spec = self.spec
        ui = np.where(self.interior, u, 0.0)
        with np.errstate(over="ignore"):
            up = ui**spec.p
            fu = np.asarray(spec.f(ui), dtype=float)
        lap = self.laplacian(u)
        R = np.where(self.interior, lap + spec.a * up - self.b * fu + self.r, u - self.phi)
        if not with_scale:
            return R
        absl = np.abs(self.diag * u)
        absl[1:] += np.abs(self.lower[1:] * u[:-1])
        absl[:-1] += np.abs(self.upper[:-1] * u[1:])
        S = np.where(self.interior, absl + abs(spec.a) * up + self.b * fu + self.r,
                     np.maximum(np.abs(u) + self.phi, 1.0))
        return R, S

    def jacobian_banded(self, u):
        spec = self.spec
        ui = np.maximum(np.where(self.interior, u, 1.0), U_FLOOR)
        with np.errstate(over="ignore"):
            dreact = spec.a * spec.p * ui ** (spec.p - 1.0) - self.b * np.asarray(spec.f.derivative(ui), dtype=float)
        ab = np.zeros((3, u.size))
        d = np.where(self.interior, self.diag + dreact, 1.0)
        ab[1] = d
        up = np.where(self.interior, self.upper, 0.0)
        lo = np.where(self.interior, self.lower, 0.0)
        ab[0, 1:] = up[:-1]
        ab[2, :-1] = lo[1:]
        return ab

    def initial_guess(self):
        x = self.grid.nodes
        if self.symmetric:
            u = np.full(x.size, self.phi[-1])
            bump = 1.0 - (x / x[-1]) ** 2
        else:
            s = (x - x[0]) / (x[-1] - x[0])
            u = self.phi[0] + s * (self.phi[-1] - self.phi[0])
            bump = 4.0 * s * (1.0 - s)
        if self.positive_problem:
            u = u + 1e-2 * max(1.0, float(self.phi.max())) * bump
        return u

    @property
    def positive_problem(self) -> bool:
        bnd = self.phi[~self.interior]
        return bool(np.any(bnd > 0) or np.any(self.r[self.interior] > 0))


def _ends(spec: ProblemSpec, grid: Grid, phi: Optional[Mapping[str, float]]):
    """Dirichlet values at the two grid ends from the spec and overrides."""
    geom = spec.geometry
    phi = dict(phi or {})
    vals = {}
    for comp in geom.components:
        if comp in phi:
            vals[comp] = float(phi[comp])
        elif isinstance(spec.boundary[comp], BlowUp):
            raise DomainError(f"component {comp!r} is a blow-up boundary; use solve_blowup")
        else:
            vals[comp] = float(spec.boundary[comp].value)
    if geom.kind == "ball":
        return None, vals["outer"]
    if geom.kind == "interval":
        return vals["left"], vals["right"]
    return vals["inner"], vals["outer"]


def assemble_residual(spec: ProblemSpec, grid: Grid, u, phi: Optional[Mapping[str, float]] = None):
    """Residual at every node (interior equation rows, boundary rows ``u - Phi``).

    ``phi`` overrides boundary values per component and is required for
    blow-up components.
    """
    return Discretization(spec, grid, _ends(spec, grid, phi)).residual(u)


def newton(disc: Discretization, u_init=None, tol: float = 1e-10, max_iter: int = 100) -> DiscreteField:
    """Damped Newton on a prepared discretization."""
    u = disc.initial_guess() if u_init is None else np.array(u_init, dtype=float)
    u[~disc.interior] = disc.phi[~disc.interior]
    positive = disc.positive_problem
    polished = False
    res = np.inf
    for it in range(max_iter + 1):
        R, S = disc.residual(u, with_scale=True)
        scaled = np.abs(R) / np.maximum(S, 1e-300)
        res = float(scaled.max())
        if res == 0.0 or (res <= tol and polished):
            break
        if it == max_iter:
            break
        du = solve_banded((1, 1), disc.jacobian_banded(u), -R)
        du[~disc.interior] = -R[~disc.interior]  # exact, free of pivoting roundoff
        if not np.all(np.isfinite(du)):
            raise NonConvergenceError("singular Newton system", {"iterate": u.copy(), "iterations": it})
        if res <= tol:
            trial = u + du
            if _admissible(trial, disc, positive):
                u = trial
            polished = True
            continue
        merit = float(np.linalg.norm(scaled))
        alpha, accepted, lost_positivity = 1.0, False, 0
        for _ in range(MAX_HALVINGS):
            trial = u + alpha * du
            if _admissible(trial, disc, positive):
                Rn = disc.residual(trial)
                mn = float(np.linalg.norm(Rn / np.maximum(S, 1e-300)))
                if np.isfinite(mn) and mn < (1.0 - 1e-4 * alpha) * merit:
                    accepted = True
                    break
            else:
                lost_positivity += 1
            alpha *= 0.5
        if not accepted:
            report = {"iterate": u.copy(), "residual": res, "iterations": it}
            if lost_positivity == MAX_HALVINGS:
                raise PositivityError("damping could not keep the iterate positive", report)
            raise NonConvergenceError("Newton stagnated after 40 halvings", report)
        u = trial
    if res > tol:
        raise NonConvergenceError(f"Newton did not reach tol={tol} (residual {res:.3e})",
                                  {"iterate": u.copy(), "residual": res, "iterations": it})
    if positive and np.any(u[disc.interior] <= 0):
        raise PositivityError("converged field is not positive in the interior",
                              {"iterate": u.copy(), "residual": res, "iterations": it})
    d = disc.spec.distance(disc.grid.nodes)
    return DiscreteField(disc.grid, u, d, res, it)


def _admissible(u, disc, positive):
    ui = u[disc.interior]
    if not np.all(np.isfinite(ui)):
        return False
    return bool(np.all(ui > 0)) if positive else bool(np.all(ui >= 0))


def solve_dirichlet(
    spec: ProblemSpec,
    grid: Grid,
    phi: Optional[Mapping[str, float]] = None,
    u_init=None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> DiscreteField:
    """Solve the Dirichlet problem by damped Newton.

    ``phi`` maps boundary components to values and overrides the spec;
    ``tol`` bounds ``max |R_i| / S_i`` where ``S_i`` sums the magnitudes
    of the terms in row ``i``.
    """
    disc = Discretization(spec, grid, _ends(spec, grid, phi))
    try:
        return newton(disc, u_init, tol, max_iter)
    except NonConvergenceError:
        if u_init is not None or not disc.positive_problem:
            raise
        # singular u**p near u = 0 can defeat Newton; start it from the monotone limit instead
        sup = _constant_supersolution(disc)
        if sup is None:
            raise
        sub = np.where(disc.interior, 0.0, disc.phi)
        start = _monotone(disc, sub, sup, 1e-8, 200000)[0]
        fld = newton(disc, start, tol, max_iter)
        fld.meta["started_from"] = "monotone"
        return fld


def _shift(disc: Discretization, sub, sup, samples: int = 9) -> float:
    """One-sided bound on ``d/du (b f(u) - a u**p)`` over the bracket, times 1.1."""
    spec = disc.spec
    s = np.linspace(0.0, 1.0, samples)[:, None]
    u = np.maximum(sub[None, :] + s * (sup - sub)[None, :], U_FLOOR)
    with np.errstate(over="ignore"):
        g = disc.b[None, :] * np.asarray(spec.f.derivative(u)) - spec.a * spec.p * u ** (spec.p - 1.0)
    g = g[:, disc.interior]
    return 1.1 * max(float(np.max(g)), 0.0)


def _monotone(disc: Discretization, sub, sup, tol: float, max_iter: int):
    """Core of :func:`monotone_iteration`; returns ``(u, steps, shift, change, signs)``."""
    sub = np.asarray(sub, dtype=float)
    sup = np.asarray(sup, dtype=float)
    if np.any(sub > sup):
        raise BracketError("sub must lie below super nodewise")
    lam = _shift(disc, sub, sup)
    inner = disc.interior
    signs = {
        "sub_is_subsolution": bool(np.all(disc.residual(sub)[inner] >= -1e-12 * (1 + np.abs(sub[inner])))),
        "super_is_supersolution": bool(np.all(disc.residual(sup)[inner] <= 1e-12 * (1 + np.abs(sup[inner])))),
    }
    ab = np.zeros((3, sub.size))
    ab[1] = np.where(inner, lam - disc.diag, 1.0)
    ab[0, 1:] = np.where(inner, -disc.upper, 0.0)[:-1]
    ab[2, :-1] = np.where(inner, -disc.lower, 0.0)[1:]
    u = sup.copy()
    u[~inner] = disc.phi[~inner]
    spec = disc.spec
    scale = max(float(np.abs(sup).max()), 1.0)
    change = np.inf
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore"):
            rhs = lam * u + spec.a * u**spec.p - disc.b * np.asarray(spec.f(u)) + disc.r
        rhs = np.where(inner, rhs, disc.phi)
        new = solve_banded((1, 1), ab, rhs)
        new[~inner] = disc.phi[~inner]  # exact, free of pivoting roundoff
        slack = 1e-12 * np.maximum(np.abs(u), scale * 1e-4)
        if np.any(new > u + slack):
            raise BracketError(f"iterate increased at step {it} (shift {lam:.3e} too small?)")
        if np.any(new < sub - slack):
            raise BracketError(f"iterate fell below the sub-solution at step {it}")
        change = float(np.max(np.abs(new - u)) / scale)
        u = new
        if change < tol:
            return u, it, lam, change, signs
    raise NonConvergenceError("monotone iteration did not settle", {"iterate": u, "change": change})


def _constant_supersolution(disc: Discretization, max_doublings: int = 200):
    """Smallest ``2**j * max(phi, 1)`` whose interior residual is nonpositive, or None."""
    inner = disc.interior
    m = max(float(disc.phi.max()), 1.0)
    for _ in range(max_doublings):
        sup = np.where(inner, m, disc.phi)
        with np.errstate(over="ignore", invalid="ignore"):
            R = disc.residual(sup)
        if np.all(np.isfinite(R[inner])) and np.all(R[inner] <= 0):
            return sup
        m *= 2.0
    return None


def monotone_iteration(
    spec: ProblemSpec,
    grid: Grid,
    sub,
    sup,
    phi: Optional[Mapping[str, float]] = None,
    tol: float = 1e-12,
    max_iter: int = 200000,
) -> DiscreteField:
    """Monotone iteration from the super-solution down to the solution.

    ``u_{k+1} = (lam I - L_h)^{-1} (lam u_k + a u_k**p - b f(u_k) + r)``;
    iterates must be nonincreasing and stay above ``sub`` (to ``1e-12``
    relative), otherwise :class:`BracketError`.  Stops when the relative
    sup-change drops below ``tol``.  ``meta`` records the shift and whether
    the residual signs of ``sub``/``sup`` are those of a bracket.
    """
    disc = Discretization(spec, grid, _ends(spec, grid, phi))
    u, it, lam, change, signs = _monotone(disc, sub, sup, tol, max_iter)
    R, S = disc.residual(u, with_scale=True)
    res = float(np.max(np.abs(R) / np.maximum(S, 1e-300)))
    fld = DiscreteField(grid, u, spec.distance(grid.nodes), res, it)
    fld.meta.update(signs, shift=lam, last_change=change)
    return fld
