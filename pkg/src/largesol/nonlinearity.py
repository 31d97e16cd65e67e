"""Reaction terms ``f`` and the checks the existence theory needs.

Built-in families: ``u**q``, ``exp(u)``, ``u**q * ln(1+u)`` and
``u * ln(1+u)**p``.  Each carries its primitive ``F``, the tail integral
``phi(v) = int_v^inf ds / sqrt(F(s))`` and, where it exists, the index
``rho`` with ``f`` regularly varying of index ``rho + 1``.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, InvalidNonlinearityError, KellerOssermanError, NumericError

__all__ = [
    "Nonlinearity",
    "KOResult",
    "H4Result",
    "primitive_F",
    "keller_osserman",
    "check_h1",
    "check_h2",
    "check_h4",
    "phi_tail",
    "gurtin_maccamy_transform",
]

log = logging.getLogger(__name__)

QUAD_RTOL = 1e-13


class _PrimitiveTable:
    """Cumulative ``F`` at ``0, 1, 2, 4, ...`` built lazily under a lock."""

    def __init__(self, f):
        self._f = f
        self._lock = threading.Lock()
        self._nodes = [0.0, 1.0]
        self._values = [0.0, _integrate(f, 0.0, 1.0)]

    def value_at(self, n: int) -> float:
        """``F(2**n)`` for ``n >= 0``."""
        with self._lock:
            while len(self._nodes) < n + 2:
                a = self._nodes[-1]
                b = 2.0 * a
                self._values.append(self._values[-1] + _integrate(self._f, a, b))
                self._nodes.append(b)
            return self._values[n + 1]

    def __call__(self, u: float) -> float:
        if u <= 1.0:
            return _integrate(self._f, 0.0, u) if u > 0 else 0.0
        n = int(math.floor(math.log2(u)))
        base = 2.0**n
        return self.value_at(n) + _integrate(self._f, base, u)


def _integrate(func, a, b):
    if b <= a:
        return 0.0
    val, err, *rest = quad(func, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200, full_output=1)
    if val == math.inf:  # overflow of a positive integrand
        return val
    if not math.isfinite(val) or (len(rest) > 1 and err > 1e-6 * abs(val) + 1e-300):
        raise NumericError(f"quadrature failed on [{a}, {b}]", interval=(a, b))
    return val


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Reaction term ``f`` with derivative, primitive and RV index.

    Use the class-method constructors.  ``F`` may be ``None`` for custom
    kinds, in which case it is computed by cached adaptive quadrature.
    """

    kind: str
    f: Callable = field(repr=False)
    df: Callable = field(repr=False)
    F: Optional[Callable] = field(default=None, repr=False)
    rho: Optional[float] = None
    param: Optional[float] = None
    phi_closed: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("power", "exponential", "power_log", "log_power", "custom"):
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.F is None:
            object.__setattr__(self, "_table", _PrimitiveTable(lambda s: float(self.f(s))))

    # constructors -------------------------------------------------------
    @classmethod
    def power(cls, q: float) -> "Nonlinearity":
        """``f(u) = u**q``."""
        q = float(q)
        if q <= 0:
            raise DomainError("power nonlinearity needs q > 0")

        def f(u):
            return np.asarray(u, dtype=float) ** q

        def df(u):
            return q * np.asarray(u, dtype=float) ** (q - 1.0)

        def F(u):
            return np.asarray(u, dtype=float) ** (q + 1.0) / (q + 1.0)

        phi = None
        if q > 1:
            const = 2.0 * math.sqrt(q + 1.0) / (q - 1.0)

            def phi(v):
                return const * v ** (-(q - 1.0) / 2.0)

        rho = q - 1.0 if q > 1 else None
        return cls("power", f, df, F, rho, q, phi)

    @classmethod
    def exponential(cls) -> "Nonlinearity":
        """``f(u) = exp(u)``, with ``F(u) = exp(u) - 1``."""

        def phi(v):
            # int_v^inf ds / sqrt(e^s - 1) = 2 (pi/2 - atan(sqrt(e^v - 1)))
            return 2.0 * math.atan(1.0 / math.sqrt(math.expm1(v))) if v < 700 else 2.0 * math.exp(-v / 2.0)

        return cls("exponential", np.exp, np.exp, np.expm1, None, None, phi)

    @classmethod
    def power_log(cls, q: float) -> "Nonlinearity":
        """``f(u) = u**q * ln(1+u)``; regularly varying of index ``q``."""
        q = float(q)

        def f(u):
            u = np.asarray(u, dtype=float)
            return u**q * np.log1p(u)

        def df(u):
            u = np.asarray(u, dtype=float)
            return q * u ** (q - 1.0) * np.log1p(u) + u**q / (1.0 + u)

        return cls("power_log", f, df, None, q - 1.0 if q > 1 else None, q)

    @classmethod
    def log_power(cls, p: float) -> "Nonlinearity":
        """``f(u) = u * ln(1+u)**p``; regularly varying of index 1."""
        p = float(p)

        def f(u):
            u = np.asarray(u, dtype=float)
            return u * np.log1p(u) ** p

        def df(u):
            u = np.asarray(u, dtype=float)
            L = np.log1p(u)
            return L**p + p * u * L ** (p - 1.0) / (1.0 + u)

        return cls("log_power", f, df, None, None, p)

    @classmethod
    def custom(cls, f, df, F=None, rho=None) -> "Nonlinearity":
        if df is None:
            raise DomainError("custom nonlinearities must supply f' analytically")
        return cls("custom", f, df, F, rho)

    # evaluation ---------------------------------------------------------
    def __call__(self, u):
        return self.f(u)

    def derivative(self, u):
        return self.df(u)

    def primitive(self, u: float) -> float:
        return primitive_F(self, u)

    def phi(self, v: float) -> float:
        return phi_tail(self, v)

    @property
    def phi_at_zero(self) -> float:
        """``lim_{v -> 0+} phi(v)``; infinite when ``1/sqrt(F)`` is not integrable at 0."""
        if self.kind in ("power", "power_log", "log_power"):
            # F ~ u**(q+1), u**(q+2), u**(p+2) near 0
            lead = {"power": self.param + 1.0, "power_log": self.param + 2.0,
                    "log_power": self.param + 2.0}[self.kind]
            return math.inf if lead >= 2.0 else phi_tail(self, 1e-300)
        if self.kind == "exponential":
            return math.pi
        return phi_tail(self, 1e-12)

    def describe(self) -> str:
        if self.kind == "power":
            return f"u^{self.param:g}"
        if self.kind == "exponential":
            return "exp(u)"
        if self.kind == "power_log":
            return f"u^{self.param:g} ln(1+u)"
        if self.kind == "log_power":
            return f"u ln^{self.param:g}(1+u)"
        return "custom"


def primitive_F(f: Nonlinearity, u: float) -> float:
    """``F(u) = int_0^u f(s) ds`` (closed form where the kind has one)."""
    if not (u >= 0 and math.isfinite(u)):
        raise DomainError(f"primitive_F needs finite u >= 0, got {u!r}")
    if f.F is not None:
        with np.errstate(over="ignore"):
            return float(f.F(u))
    return f._table(float(u))


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass(frozen=True)
class KOResult:
    status: str  # "holds" | "fails" | "inconclusive"
    panel_sums: tuple
    ratios: tuple
    algebraic_decay: Optional[float]

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _inv_sqrt_F(f: Nonlinearity, u: float) -> float:
    try:
        Fu = primitive_F(f, u)
    except OverflowError:
        return 0.0
    if Fu == math.inf:
        return 0.0
    if not Fu > 0:
        raise InvalidNonlinearityError(f"F({u}) = {Fu} must be positive")
    return 1.0 / math.sqrt(Fu)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _panel_sum(f: Nonlinearity, n: int) -> float:
    # int_{2^n}^{2^{n+1}} du / sqrt(F) in w = ln u
    a, b = n * math.log(2.0), (n + 1) * math.log(2.0)
    w = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    vals = np.array([math.exp(wi) * _inv_sqrt_F(f, math.exp(wi)) for wi in w])
    return float(0.5 * (b - a) * np.dot(_GL_W, vals))


def keller_osserman(
    f: Nonlinearity,
    max_panels: int = 64,
    ratio_holds: float = 0.9,
    fails_fraction: float = 0.5,
    window: int = 5,
) -> KOResult:
    """Classify convergence of ``int^inf du / sqrt(F(u))``.

    Panel sums ``S_n`` over ``[2**n, 2**(n+1)]`` decide:

    * ``holds`` when ``S_{n+1}/S_n < ratio_holds`` over the last
      ``window`` panels, or when ``S_n`` decays like ``n**-s`` with
      ``s > 1.2`` (the logarithmic families, e.g. ``u ln^3(1+u)``);
    * ``fails`` when the last panels stay above ``fails_fraction * S_0``
      or decay like ``n**-s`` with ``s < 0.8``;
    * ``inconclusive`` otherwise.

    This is a numeric classifier, not a proof.
    """
    sums = []
    for n in range(max_panels):
        s = _panel_sum(f, n)
        sums.append(s)
        if s == 0.0:
            break
    S = np.array(sums)
    if S[-1] == 0.0:
        return KOResult("holds", tuple(S), (), None)
    ratios = S[1:] / S[:-1]
    last = ratios[-window:]
    if np.all(last < ratio_holds):
        return KOResult("holds", tuple(S), tuple(ratios), None)
    if np.all(S[-window:] > fails_fraction * S[0]):
        return KOResult("fails", tuple(S), tuple(ratios), None)
    # algebraic decay exponent from the upper half of the panels
    idx = np.arange(len(S) // 2, len(S))
    slope = np.polyfit(np.log(idx + 1.0), np.log(S[idx]), 1)[0]
    s_exp = float(-slope)
    if s_exp > 1.2:
        status = "holds"
    elif s_exp < 0.8:
        status = "fails"
    else:
        status = "inconclusive"
    return KOResult(status, tuple(S), tuple(ratios), s_exp)


def check_h1(f: Nonlinearity, grid: Optional[Sequence[float]] = None) -> bool:
    """``f(0) = 0`` and ``f > 0`` on the sample grid."""
    if grid is None:
        grid = np.geomspace(1e-6, 1e6, 121)
    vals = np.asarray(f(np.asarray(grid, dtype=float)), dtype=float)
    return float(f(0.0)) == 0.0 and bool(np.all(vals > 0))


def check_h2(f: Nonlinearity, grid: Optional[Sequence[float]] = None) -> bool:
    """``f`` nondecreasing on the sample grid; logs a warning when it is not."""
    if grid is None:
        grid = np.geomspace(1e-6, 1e6, 121)
    vals = np.asarray(f(np.asarray(grid, dtype=float)), dtype=float)
    ok = bool(np.all(np.diff(vals) >= 0))
    if not ok:
        log.warning("f is not monotone on the sample grid")
    return ok


@dataclass(frozen=True)
class H4Result:
    holds: bool
    violation: Optional[tuple] = None

    def __bool__(self):
        return self.holds


def check_h4(f: Nonlinearity, p: float, sample_grid: Optional[Sequence[float]] = None) -> H4Result:
    """Sample check that ``u -> f(u)/u**p`` is increasing.

    Evidence, not proof.  On failure the first violating adjacent pair
    ``(u_i, u_{i+1})`` is reported.
    """
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if sample_grid is None:
        sample_grid = np.geomspace(1e-4, 1e4, 161)
    u = np.asarray(sample_grid, dtype=float)
    g = np.asarray(f(u), dtype=float) / u**p
    bad = np.nonzero(np.diff(g) <= 0)[0]
    if bad.size:
        i = int(bad[0])
        return H4Result(False, (float(u[i]), float(u[i + 1])))
    return H4Result(True)


# ---------------------------------------------------------------------------
# tail integral


def _local_index(f: Nonlinearity, V: float) -> float:
    return V * float(f(V)) / primitive_F(f, V)


def _tail_beyond(f: Nonlinearity, V: float) -> float:
    # F(s) ~ F(V) (s/V)**(2+alpha) (ln s / ln V)**beta, both fitted from the
    # local index s f(s)/F(s) = 2 + alpha + beta/ln s at V and e**10 V
    w1 = math.log(V)
    w2 = w1 + 10.0
    m1, m2 = _local_index(f, V), _local_index(f, V * math.exp(10.0))
    beta = (m1 - m2) * w1 * w2 / (w2 - w1)
    alpha = m1 - 2.0 - beta / w1
    if -0.05 < alpha < 0 and beta > 2.0:  # fit noise from ln(1+s) vs ln s
        alpha = 0.0
    if alpha < 0 or (alpha < 1e-6 and beta <= 2.0):
        raise KellerOssermanError(
            f"tail of 1/sqrt(F) does not converge (alpha={alpha:.3g}, beta={beta:.3g})"
        )

    def g(w):
        return math.exp(-0.5 * alpha * (w - w1)) * (w / w1) ** (-0.5 * beta)

    val, _ = quad(g, w1, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return V / math.sqrt(primitive_F(f, V)) * val


def phi_tail(f: Nonlinearity, v: float) -> float:
    """``phi(v) = int_v^inf ds / sqrt(F(s))``.

    Closed form for powers and the exponential; otherwise quadrature up
    to ``V* = max(1e6, 1e4 v)`` plus an analytic tail fitted to the local
    growth index of ``F``.
    """
    if not v > 0:
        raise DomainError(f"phi_tail needs v > 0, got {v!r}")
    if f.phi_closed is not None:
        return float(f.phi_closed(v))
    if f.kind == "power":  # q <= 1
        raise KellerOssermanError(f"u^{f.param} does not satisfy the Keller-Osserman condition")
    V = max(1e6, 1e4 * v)

    def integrand(w):
        s = math.exp(w)
        return s * _inv_sqrt_F(f, s)

    body, _ = quad(integrand, math.log(v), math.log(V), epsabs=0.0, epsrel=1e-12, limit=400)
    tail = _tail_beyond(f, V)
    # slowly decaying (logarithmic) tails: push the cutoff out while F stays finite
    while tail > 1e-8 * body and 2.0 * math.log(V) + 10.0 < 300.0:
        W = V * V
        body += quad(integrand, math.log(V), math.log(W), epsabs=0.0, epsrel=1e-12, limit=400)[0]
        V = W
        tail = _tail_beyond(f, V)
    return body + tail


# ---------------------------------------------------------------------------


def gurtin_maccamy_transform(m: float):
    """Exponents ``(p, q) = (1/m, 2/m)`` of the transformed model, with the
    flag telling whether ``q > 1`` (superlinear, i.e. ``m < 2``)."""
    if not m > 1:
        raise DomainError(f"Gurtin-MacCamy exponent must satisfy m > 1, got {m}")
    return 1.0 / m, 2.0 / m, bool(m < 2)
