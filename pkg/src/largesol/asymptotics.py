"""Blow-up profile ``h`` and the boundary rate constant.

``h`` is the decreasing function fixed by

    int_{h(t)}^inf ds / sqrt(F(s)) = sqrt(2) * K(t),   K(t) = int_0^t k,

and a large solution behaves like ``xi0 * h(d(x))`` at the boundary with
``xi0 = ((2 + rho*ell1) / ((2 + rho) c))**(1/rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigurationError,
    DomainError,
    InvalidProfileError,
    NonConvergenceError,
    NumericError,
)
from .karamata import KWeight, aitken
from .nonlinearity import Nonlinearity, primitive_F

__all__ = [
    "BlowupProfile",
    "HLimitReport",
    "xi0",
    "xi_pm",
    "compute_h",
    "h_derivatives",
    "verify_h_limit",
    "convexity_window",
    "tabulate_profile",
    "write_profile",
]

RHO_MIN = 1e-3
SQRT2 = math.sqrt(2.0)


def xi0(rho: float, ell1: float, c: float) -> float:
    """Rate constant ``((2 + rho*ell1) / ((2 + rho) c))**(1/rho)``."""
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if rho < RHO_MIN:
        raise DomainError(f"rho={rho} below {RHO_MIN}: the exponent 1/rho is unusable")
    if not 0.0 <= ell1 <= 1.0:
        raise DomainError(f"ell1={ell1} outside [0, 1]")
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return ((2.0 + rho * ell1) / ((2.0 + rho) * c)) ** (1.0 / rho)


def xi_pm(rho: float, ell1: float, c: float, eps: float):
    """Bracket ``(xi_minus, xi_plus)`` around ``xi0`` for a potential known
    to lie within ``(c - eps) k**2 <= b <= (c + eps) k**2``.

    ``xi_minus`` uses ``c + 2 eps`` and ``xi_plus`` uses ``c - 2 eps``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not 2.0 * eps < c:
        raise DomainError(f"need 2*eps < c, got eps={eps}, c={c}")
    num = 2.0 + rho * ell1
    lo = (num / ((c + 2.0 * eps) * (2.0 + rho))) ** (1.0 / rho)
    hi = (num / ((c - 2.0 * eps) * (2.0 + rho))) ** (1.0 / rho)
    xi0(rho, ell1, c)  # validates the remaining arguments
    return lo, hi


@dataclass(frozen=True, eq=False)
class BlowupProfile:
    """The profile of a large solution for reaction ``f`` and weight ``k``.

    ``rho`` defaults to ``f.rho`` and ``ell1`` to ``k.ell1``.  A declared
    ``ell1`` that disagrees with the computed limit by more than ``1e-3``
    raises :class:`ConfigurationError`.
    """

    f: Nonlinearity
    k: KWeight
    c: float = 1.0
    rho: Optional[float] = None
    ell1: Optional[float] = None
    xi0: float = field(init=False)

    def __post_init__(self):
        rho = self.rho if self.rho is not None else self.f.rho
        if rho is None:
            raise DomainError(f"{self.f.describe()} is not regularly varying with index rho+1, rho>0")
        ell1 = self.k.ell1
        if self.ell1 is not None:
            if abs(self.ell1 - ell1) > 1e-3:
                raise ConfigurationError(f"declared ell1={self.ell1} but the weight gives {ell1}")
            ell1 = self.ell1
        object.__setattr__(self, "rho", float(rho))
        object.__setattr__(self, "ell1", float(ell1))
        object.__setattr__(self, "xi0", xi0(self.rho, self.ell1, self.c))

    @property
    def nu(self) -> float:
        return self.k.nu

    def h(self, t: float) -> float:
        return compute_h(self, t)

    def derivatives(self, t: float):
        return h_derivatives(self, t)

    def xi_pm(self, eps: float):
        return xi_pm(self.rho, self.ell1, self.c, eps)

    @cached_property
    def t_max(self) -> float:
        """Supremum of admissible ``t``: ``nu``, or smaller when ``phi(0+)`` is finite."""
        phi0 = self.f.phi_at_zero
        if math.isinf(phi0):
            return self.nu
        g = lambda t: SQRT2 * self.k.primitive(t) - phi0  # noqa: E731
        hi = self.nu * (1 - 1e-12)
        if g(hi) < 0:
            return self.nu
        return brentq(g, 1e-12 * self.nu, hi, xtol=1e-15 * self.nu)

    @cached_property
    def convexity_delta(self) -> float:
        return convexity_window(self)


def compute_h(profile: BlowupProfile, t: float) -> float:
    """Solve ``phi(h) = sqrt(2) K(t)`` for ``h > 0``.

    The bracket grows geometrically from ``h = 1`` and the root is then
    polished in ``log h``, where ``log phi`` is close to linear.
    """
    if not 0.0 < t < profile.nu:
        raise DomainError(f"t={t} outside (0, {profile.nu})")
    log_target = 0.5 * math.log(2.0) + profile.k.log_primitive(t)
    if not log_target < math.log(profile.f.phi_at_zero):
        raise DomainError(f"t={t} beyond the profile domain (sqrt(2) K(t) >= phi(0+))")
    f = profile.f

    def g(w):
        return math.log(f.phi(math.exp(w))) - log_target

    lo, hi = 0.0, 0.0
    step = 1.0
    # phi decreasing: g(lo) > 0 > g(hi)
    while g(hi) > 0:
        lo, hi = hi, hi + step
        step *= 2.0
        if hi > 700:
            raise NumericError(f"no bracket for h({t}) below exp(700)")
    while g(lo) < 0:
        lo, hi = lo - step, lo
        step *= 2.0
        if lo < -700:
            raise NumericError(f"no bracket for h({t}) above exp(-700)")
    w = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(w)


def h_derivatives(profile: BlowupProfile, t: float):
    """``(h', h'')`` from the differentiated profile identity.

    ``h' = -sqrt(2) k sqrt(F(h))`` and ``h'' = k**2 f(h) - sqrt(2) k' sqrt(F(h))``.
    """
    h = compute_h(profile, t)
    with np.errstate(over="ignore", invalid="ignore"):
        sF = math.sqrt(primitive_F(profile.f, h))
        k = float(profile.k(t))
        dk = float(profile.k.derivative(t))
        d1 = -SQRT2 * k * sF
        d2 = k * k * float(profile.f(h)) - SQRT2 * dk * sF
    return d1, d2


@dataclass(frozen=True)
class HLimitReport:
    estimate: float
    target: float
    converged: bool
    ratios: tuple
    h_over_h2: tuple
    h1_over_h2: tuple

    @property
    def relative_error(self) -> float:
        return abs(self.estimate - self.target) / abs(self.target)


def verify_h_limit(
    profile: BlowupProfile,
    xi: float,
    t_sequence: Optional[Sequence[float]] = None,
) -> HLimitReport:
    """Check ``h''/(k**2 f(xi h)) -> (2 + rho ell1)/((2 + rho) xi**(1+rho))``
    and that ``h/h''`` and ``h'/h''`` vanish along ``t_sequence``."""
    if not xi > 0:
        raise DomainError("xi must be positive")
    if t_sequence is None:
        t_sequence = 0.1 * profile.nu * 0.5 ** np.arange(14)
    ratios, a, b = [], [], []
    for t in t_sequence:
        try:
            h = compute_h(profile, t)
            d1, d2 = h_derivatives(profile, t)
        except (NumericError, OverflowError):
            break  # h has left the floating-point range
        k = float(profile.k(t))
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = d2 / (k * k * float(profile.f(h * xi)))
        if not (math.isfinite(ratio) and ratio > 0):
            break
        ratios.append(ratio)
        a.append(h / d2)
        b.append(d1 / d2)
    if len(ratios) < 3:
        raise NonConvergenceError("fewer than three usable points in t_sequence",
                                  {"ratios": ratios})
    acc = aitken(ratios)
    last = acc[-3:]
    converged = float(np.ptp(last)) <= 1e-3 * max(abs(float(last[-1])), 1e-300)
    rho, ell1 = profile.rho, profile.ell1
    target = (2.0 + rho * ell1) / ((2.0 + rho) * xi ** (1.0 + rho))
    return HLimitReport(float(acc[-1]), target, converged, tuple(ratios), tuple(a), tuple(b))


def convexity_window(profile: BlowupProfile, levels: int = 40, points: int = 96) -> float:
    """Largest dyadic ``delta <= nu/2`` with ``h'' > 0`` on a test grid in ``(0, delta)``."""
    top = 0.5 * min(profile.nu, profile.t_max)
    for n in range(levels):
        delta = top * 0.5**n
        grid = delta * np.geomspace(1e-6, 1.0, points, endpoint=False)
        values = []
        for t in grid:
            try:
                d2 = h_derivatives(profile, t)[1]
                if math.isfinite(d2):
                    values.append(d2)
            except (NumericError, OverflowError):
                continue  # h beyond floating range: not testable at this t
        values = np.array(values)
        if values.size and np.all(values > 0):
            return delta
    raise InvalidProfileError("h'' is not positive at any tested scale")


def tabulate_profile(profile: BlowupProfile, t_min: float, t_max: float, per_decade: int = 64):
    """``(t, h(t))`` on a geometric grid with ``per_decade`` points per decade."""
    if not 0 < t_min < t_max < profile.nu:
        raise DomainError("need 0 < t_min < t_max < nu")
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    t = np.geomspace(t_min, t_max, n)
    return t, np.array([compute_h(profile, ti) for ti in t])


def write_profile(path, t, h) -> None:
    """Two columns ``t h(t)``, one pair per line, round-trip precision."""
    with open(path, "w") as fh:
        for ti, hi in zip(t, h):
            fh.write(f"{float(ti)!r} {float(hi)!r}\n")
