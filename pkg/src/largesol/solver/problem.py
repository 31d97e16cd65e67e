"""Problem specification: geometry, coefficients and boundary data."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Union

import numpy as np

from ..errors import DomainError
from ..karamata import KWeight
from ..nonlinearity import Nonlinearity
from .geometry import Geometry

__all__ = ["Dirichlet", "BlowUp", "ProblemSpec"]


@dataclass(frozen=True)
class Dirichlet:
    value: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0):
            raise DomainError(f"Dirichlet value must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class BlowUp:
    pass


Boundary = Union[Dirichlet, BlowUp]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """``Δu + a u**p = b(x) f(u) - r(x)`` with ``b = c k(d)**2 + perturbation(d) + lift``.

    ``d`` is the distance to the blow-up components, or to the whole
    boundary when there are none.  ``reference`` overrides the geometry
    used to measure ``d`` in the potential; it lets a problem posed on a
    subdomain keep the coefficients of the original domain.
    ``perturbation`` and ``source`` are vectorised callables of ``d`` and of
    the coordinate respectively.
    """

    geometry: Geometry
    f: Nonlinearity
    boundary: Mapping[str, Boundary]
    a: float = 0.0
    p: float = 0.5
    c: float = 1.0
    k: KWeight = field(default_factory=KWeight.constant)
    perturbation: Optional[Callable] = None
    source: Optional[Callable] = None
    lift: float = 0.0
    reference: Optional[Geometry] = None
    reference_components: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not np.isfinite(self.a):
            raise DomainError("a must be finite")
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if self.lift < 0:
            raise DomainError("lift must be >= 0")
        if not self.boundary:
            raise DomainError("at least one boundary component must be specified")
        comps = self.geometry.components
        bnd = dict(self.boundary)
        for name, cond in bnd.items():
            if name not in comps:
                raise DomainError(f"{name!r} is not a boundary component of a {self.geometry.kind}")
            if not isinstance(cond, (Dirichlet, BlowUp)):
                raise DomainError(f"boundary condition for {name!r} must be Dirichlet or BlowUp")
        missing = [c for c in comps if c not in bnd]
        if missing:
            raise DomainError(f"no boundary condition for {missing}")
        object.__setattr__(self, "boundary", bnd)

    @property
    def blowup_components(self) -> tuple:
        return tuple(c for c in self.geometry.components if isinstance(self.boundary[c], BlowUp))

    @property
    def dirichlet_components(self) -> tuple:
        return tuple(c for c in self.geometry.components if isinstance(self.boundary[c], Dirichlet))

    def distance(self, x) -> np.ndarray:
        """Distance to the blow-up components of this spec's own geometry."""
        return self.geometry.distance(x, self.blowup_components)

    def potential_distance(self, x) -> np.ndarray:
        if self.reference is None:
            return self.distance(x)
        return self.reference.distance(x, self.reference_components)

    def potential(self, x) -> np.ndarray:
        d = self.potential_distance(x)
        with np.errstate(over="ignore", under="ignore"):
            b = self.c * np.asarray(self.k(d), dtype=float) ** 2
        if self.perturbation is not None:
            b = b + np.asarray(self.perturbation(d), dtype=float)
        return b + self.lift

    def source_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.source is None:
            return np.zeros_like(x)
        r = np.broadcast_to(np.asarray(self.source(x), dtype=float), x.shape).copy()
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise DomainError("source r must be finite and nonnegative")
        return r

    def replace(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def with_boundary(self, **conds) -> "ProblemSpec":
        bnd = dict(self.boundary)
        bnd.update(conds)
        return replace(self, boundary=bnd)

    def dirichlet_surrogate(self, value: float) -> "ProblemSpec":
        """All blow-up components replaced by ``Dirichlet(value)``; the
        potential keeps its original distance function."""
        comps = self.blowup_components
        spec = self.with_boundary(**{c: Dirichlet(value) for c in comps})
        if self.reference is None and comps:
            spec = replace(spec, reference=self.geometry, reference_components=comps)
        return spec
