"""Regular variation toolkit.

Index estimation for functions regularly varying at infinity, the
Karamata ratio limit, and boundary weights of the class used for the
potential ``b(x) = c k(d(x))**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import (
    DomainError,
    InvalidFunctionError,
    InvalidWeightError,
    NonConvergenceError,
)

__all__ = [
    "RVFunction",
    "RVIndexResult",
    "LimitEstimate",
    "KWeight",
    "aitken",
    "aitken_limit",
    "log_extrapolate",
    "rv_index_estimate",
    "karamata_limit",
    "ell_limits",
    "K_primitive",
]

NON_RV_SPREAD = 0.05
STABLE_RTOL = 1e-6


# ---------------------------------------------------------------------------
# limit extraction


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    converged: bool
    history: tuple = ()


def aitken(s: Sequence[float]) -> np.ndarray:
    """Aitken delta-squared transform of a sequence.

    Where the second difference vanishes (the sequence is already exact
    or arithmetic) the last raw term is kept.
    """
    s = np.asarray(s, dtype=float)
    if s.size < 3:
        return s[-1:].copy()
    s0, s1, s2 = s[:-2], s[1:-1], s[2:]
    d1 = s1 - s0
    d2 = s2 - 2.0 * s1 + s0
    out = s2.copy()
    scale = np.maximum(np.abs(s0) + np.abs(s1) + np.abs(s2), 1e-300)
    ok = np.abs(d2) > 1e-14 * scale
    out[ok] = s0[ok] - d1[ok] ** 2 / d2[ok]
    return out


def aitken_limit(
    term: Callable[[float], float],
    x0: float,
    ratio: float = 0.5,
    max_terms: int = 40,
    min_terms: int = 6,
    rtol: float = STABLE_RTOL,
    atol: float = 1e-9,
) -> LimitEstimate:
    """Limit of ``term(x)`` along ``x_n = x0 * ratio**n``.

    Stabilisation means the last three accelerated values agree within
    ``rtol`` (relative) or ``atol`` (absolute, for limits at zero).
    """
    raw = []
    acc = np.array([])
    for n in range(max_terms):
        try:
            value = float(term(x0 * ratio**n))
        except ArithmeticError:  # under/overflow ends the usable sequence
            break
        if not math.isfinite(value):
            break
        raw.append(value)
        if len(raw) < max(min_terms, 5):
            continue
        acc = aitken(raw)
        last = acc[-3:]
        spread = float(np.max(last) - np.min(last))
        if spread <= max(rtol * float(np.max(np.abs(last))), atol):
            return LimitEstimate(float(acc[-1]), True, tuple(raw))
    value = float(acc[-1]) if acc.size else float("nan")
    return LimitEstimate(value, False, tuple(raw))


def log_extrapolate(u: np.ndarray, values: np.ndarray, degree: int = 3):
    """Extrapolate ``values(u)`` to ``u -> inf`` as a polynomial in ``1/ln u``.

    Slowly varying factors produce corrections that are power series in
    ``1/ln u``; an exact power law gives a constant sequence.  Returns the
    extrapolated value and the same extrapolation with the largest-``u``
    sample dropped, whose difference serves as the stability check.
    """
    s = 1.0 / np.log(np.asarray(u, dtype=float))
    v = np.asarray(values, dtype=float)
    deg = min(degree, len(s) - 2)
    if np.ptp(v) <= 1e-13 * max(1.0, float(np.max(np.abs(v)))):
        return float(v[-1]), float(v[-1])
    full = np.polyval(np.polyfit(s, v, deg), 0.0)
    drop = np.polyval(np.polyfit(s[:-1], v[:-1], deg), 0.0)
    return float(full), float(drop)


# ---------------------------------------------------------------------------
# regularly varying functions


@dataclass(frozen=True)
class RVFunction:
    """A positive function on ``[A, inf)``, optionally with its RV index.

    ``log_evaluator`` may be given for functions whose values overflow
    (``exp(u)``); otherwise ``log(evaluator(u))`` is used.
    """

    evaluator: Callable[[float], float]
    A: float = 1.0
    declared_index: Optional[float] = None
    log_evaluator: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"lower bound A must be positive, got {self.A}")

    def __call__(self, u):
        return self.evaluator(u)

    def log(self, u: float) -> float:
        if self.log_evaluator is not None:
            return float(self.log_evaluator(u))
        try:
            val = float(self.evaluator(u))
        except OverflowError:
            return math.inf
        if math.isnan(val) or val <= 0.0 or val == -math.inf:
            raise InvalidFunctionError(f"R({u!r}) = {val!r} is not positive")
        return math.log(val)  # +inf propagates as overflow


@dataclass(frozen=True)
class RVIndexResult:
    index: Optional[float]
    is_rv: bool
    per_xi: tuple
    spread: float

    def __bool__(self):
        return self.is_rv


def rv_index_estimate(
    R: RVFunction,
    u_max: float,
    xi_set: Sequence[float] = (2.0, 4.0, 8.0),
    n_points: int = 24,
    spread_threshold: float = NON_RV_SPREAD,
) -> RVIndexResult:
    """Estimate ``q`` with ``R(xi u)/R(u) -> xi**q``.

    Per-``xi`` estimates ``log(R(xi u)/R(u))/log(xi)`` are sampled on
    ``u_n = u_max / 2**n`` and extrapolated in ``1/ln u``.  A function
    whose estimates disagree across ``xi`` by more than
    ``spread_threshold``, or keep drifting, is reported as not regularly
    varying (``is_rv=False``); that is a result, not an error.
    """
    if not xi_set:
        raise DomainError("xi_set must be nonempty")
    if any(xi <= 1.0 for xi in xi_set):
        raise DomainError("every xi must exceed 1")
    if u_max < 10.0 * R.A:
        raise DomainError(f"u_max={u_max} must be at least 10*A={10 * R.A}")

    n_avail = int(math.floor(math.log2(u_max / R.A)))
    n = max(3, min(n_points, n_avail + 1))
    u = u_max / 2.0 ** np.arange(n - 1, -1, -1)
    u = u[u >= R.A]

    per_xi = []
    for xi in xi_set:
        vals = []
        for ui in u:
            lo, hi = R.log(ui), R.log(xi * ui)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                return RVIndexResult(None, False, tuple(per_xi), math.inf)
            vals.append((hi - lo) / math.log(xi))
        vals = np.array(vals)
        full, drop = log_extrapolate(u, vals)
        per_xi.append((full, abs(full - drop)))

    estimates = np.array([p[0] for p in per_xi])
    spread = float(np.ptp(estimates)) if len(estimates) > 1 else 0.0
    drift = max(p[1] for p in per_xi)
    if spread > spread_threshold or drift > spread_threshold:
        return RVIndexResult(None, False, tuple(estimates), max(spread, drift))
    return RVIndexResult(float(np.mean(estimates)), True, tuple(estimates), spread)


def karamata_limit(
    R: RVFunction,
    j: float,
    D: float,
    u_max: float,
    n_points: int = 20,
) -> LimitEstimate:
    """Limit of ``u**(j+1) R(u) / int_D^u x**j R(x) dx`` as ``u -> inf``.

    For ``R`` regularly varying with index ``q`` and ``j > -q-1`` this is
    ``q + j + 1``.  The denominator is accumulated panel by panel along
    the geometric sample sequence.
    """
    if not D >= R.A:
        raise DomainError(f"D={D} must be >= A={R.A}")
    if not u_max > 4.0 * D:
        raise DomainError("u_max must exceed 4*D")
    n_avail = int(math.floor(math.log2(u_max / D)))
    n = max(4, min(n_points, n_avail))
    u = u_max / 2.0 ** np.arange(n - 1, -1, -1)

    def integrand(x):
        return x**j * R(x)

    total = 0.0
    left = D
    ratios = []
    for ui in u:
        piece, _ = quad(integrand, left, ui, epsrel=1e-13, epsabs=0.0, limit=200)
        total += piece
        left = ui
        if not (math.isfinite(total) and total > 0.0):
            raise InvalidFunctionError(
                f"denominator integral over [{D}, {ui}] is {total!r}"
            )
        ratios.append(ui ** (j + 1) * R(ui) / total)
    ratios = np.array(ratios)
    return _limit_at_infinity(u, ratios)


def _limit_at_infinity(u, values, rtol=1e-4):
    # power-law corrections: Aitken stabilises; slowly varying ones: fit in 1/ln u
    acc = aitken(values)
    last = acc[-3:]
    if acc.size >= 3 and np.ptp(last) <= STABLE_RTOL * max(1.0, float(np.max(np.abs(last)))):
        return LimitEstimate(float(acc[-1]), True, tuple(values))
    half = u >= np.sqrt(u[0] * u[-1])
    full, drop = log_extrapolate(u[half], values[half], degree=2)
    converged = abs(full - drop) <= rtol * max(1.0, abs(full))
    return LimitEstimate(full, converged, tuple(values))


# ---------------------------------------------------------------------------
# boundary weights


def _quad_ratio_scaled_exp(t: float) -> float:
    # int_0^t exp(1/t - 1/s) ds with s = t/(1 + t v)
    val, _ = quad(lambda v: math.exp(-v) / (1.0 + t * v) ** 2, 0.0, math.inf,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return t * t * val


@dataclass(frozen=True)
class KWeight:
    """Positive nondecreasing weight ``k`` on ``(0, nu)``.

    Build with :meth:`power`, :meth:`exp_flat`, :meth:`constant` or
    :meth:`custom`.  Custom weights must supply the derivative.
    """

    kind: str
    func: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    nu: float = 1.0
    gamma: Optional[float] = None
    declared_ell1: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("power", "exp_flat", "custom"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if not self.nu > 0:
            raise DomainError("nu must be positive")
        ts = self.nu * np.geomspace(1e-2, 0.999, 48)
        kv = np.asarray(self.func(ts), dtype=float)
        dv = np.asarray(self.deriv(ts), dtype=float)
        if not np.all(np.isfinite(kv)) or np.any(kv <= 0):
            raise InvalidWeightError("k must be positive and finite on (0, nu)")
        if np.any(dv < 0) or np.any(np.diff(kv) < -1e-14 * kv[1:]):
            raise InvalidWeightError("k must be nondecreasing on (0, nu)")

    # constructors -------------------------------------------------------
    @classmethod
    def power(cls, gamma: float, nu: float = 1.0) -> "KWeight":
        if gamma < 0:
            raise DomainError("power weight needs gamma >= 0")
        g = float(gamma)
        if g == 0.0:
            func = lambda t: np.ones_like(np.asarray(t, dtype=float))  # noqa: E731
            deriv = lambda t: np.zeros_like(np.asarray(t, dtype=float))  # noqa: E731
        else:
            func = lambda t: np.asarray(t, dtype=float) ** g  # noqa: E731
            deriv = lambda t: g * np.asarray(t, dtype=float) ** (g - 1.0)  # noqa: E731
        return cls("power", func, deriv, nu, g)

    @classmethod
    def constant(cls, nu: float = 1.0) -> "KWeight":
        return cls.power(0.0, nu)

    @classmethod
    def exp_flat(cls, nu: float = 1.0) -> "KWeight":
        def func(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-1.0 / t)

        def deriv(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-1.0 / t) / t**2

        return cls("exp_flat", func, deriv, nu)

    @classmethod
    def custom(cls, k, dk, nu: float = 1.0, ell1: Optional[float] = None) -> "KWeight":
        return cls("custom", k, dk, nu, None, ell1)

    # evaluation ---------------------------------------------------------
    def __call__(self, t):
        return self.func(t)

    def derivative(self, t):
        return self.deriv(t)

    def _check_t(self, t):
        if not 0.0 < t < self.nu:
            raise DomainError(f"t={t} outside (0, {self.nu})")

    def primitive(self, t: float) -> float:
        """``K(t) = int_0^t k(s) ds``."""
        self._check_t(t)
        if self.kind == "power":
            return t ** (self.gamma + 1.0) / (self.gamma + 1.0)
        if self.kind == "exp_flat":
            return math.exp(-1.0 / t) * _quad_ratio_scaled_exp(t)
        return self._quad_primitive(t)

    def log_primitive(self, t: float) -> float:
        """``log K(t)``, finite even where ``K(t)`` underflows."""
        self._check_t(t)
        if self.kind == "exp_flat":
            return -1.0 / t + math.log(_quad_ratio_scaled_exp(t))
        return math.log(self.primitive(t))

    def _quad_primitive(self, t):
        try:
            val, err = quad(lambda s: float(self.func(s)), 0.0, t,
                            epsabs=0.0, epsrel=1e-12, limit=400, full_output=0)
        except Exception as exc:  # scipy raises on bad integrands
            raise InvalidWeightError(f"cannot integrate k on (0, {t}): {exc}") from exc
        if not math.isfinite(val) or val <= 0:
            raise InvalidWeightError(f"int_0^{t} k = {val!r}")
        return val

    def ratio(self, t: float) -> float:
        """``K(t) / k(t)``, evaluated without forming tiny ``k`` where possible."""
        if self.kind == "power":
            return t / (self.gamma + 1.0)
        if self.kind == "exp_flat":
            return _quad_ratio_scaled_exp(t)
        kt = float(self.func(t))
        val, _ = quad(lambda s: float(self.func(s)) / kt, 0.0, t,
                      epsabs=0.0, epsrel=1e-12, limit=400)
        return val

    @property
    def ell0(self) -> float:
        return 0.0

    @cached_property
    def ell1(self) -> float:
        if self.kind == "power":
            return 1.0 / (self.gamma + 1.0)
        if self.kind == "exp_flat":
            return 0.0
        if self.declared_ell1 is not None:
            return float(self.declared_ell1)
        return ell_limits(self)[1]


def K_primitive(k: KWeight, t: float) -> float:
    """Primitive ``int_0^t k(s) ds`` on ``0 < t < nu``."""
    return k.primitive(t)


def ell_limits(k: KWeight, t0: Optional[float] = None, tol: float = 1e-6):
    """Limits at ``0+`` of ``K/k`` and of its derivative.

    Evaluated on ``t_n = t0 / 2**n`` with Aitken acceleration; the
    derivative is a central difference with step ``t/100``.
    """
    if t0 is None:
        t0 = 0.25 * k.nu

    def r1(t):
        h = t / 100.0
        return (k.ratio(t + h) - k.ratio(t - h)) / (2.0 * h)

    try:
        l0 = aitken_limit(k.ratio, t0, atol=1e-12)
        l1 = aitken_limit(r1, t0, atol=1e-9)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise InvalidWeightError(f"cannot evaluate K/k near 0: {exc}") from exc
    if not (l0.converged and l1.converged):
        raise NonConvergenceError(
            "ell limits did not stabilise",
            {"ell0": l0.history, "ell1": l1.history},
        )
    if abs(l0.value) > tol:
        raise InvalidWeightError(f"ell0 = {l0.value} is not 0")
    if not (-tol <= l1.value <= 1.0 + tol):
        raise InvalidWeightError(f"ell1 = {l1.value} outside [0, 1]")
    return 0.0, float(min(max(l1.value, 0.0), 1.0))
