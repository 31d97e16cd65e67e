"""Interval, ball and annulus geometries and their 1-D grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ..errors import DomainError

__all__ = ["Geometry", "Grid"]


@dataclass(frozen=True)
class Geometry:
    """A domain reduced to one coordinate.

    ``interval(lo, hi)`` has components ``left``/``right``.  ``ball(N, R)``
    uses the radial coordinate on ``[0, R]``; its only component is
    ``outer`` and ``r = 0`` carries the symmetry condition.  ``annulus(N,
    R0, R1)`` has components ``inner`` and ``outer``.
    """

    kind: str
    lo: float
    hi: float
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("interval", "ball", "annulus"):
            raise DomainError(f"unknown geometry {self.kind!r}")
        if not self.lo < self.hi:
            raise DomainError(f"bounds must be ordered, got ({self.lo}, {self.hi})")
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError("dimension must be an integer >= 1")
        if self.kind == "ball" and self.lo != 0.0:
            raise DomainError("a ball is centred at r = 0")
        if self.kind == "annulus" and (self.dim < 2 or self.lo <= 0):
            raise DomainError("an annulus needs N >= 2 and 0 < R0 < R1")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Geometry":
        return cls("interval", float(lo), float(hi), 1)

    @classmethod
    def ball(cls, dim: int, radius: float) -> "Geometry":
        return cls("ball", 0.0, float(radius), int(dim))

    @classmethod
    def annulus(cls, dim: int, r0: float, r1: float) -> "Geometry":
        return cls("annulus", float(r0), float(r1), int(dim))

    @property
    def radial(self) -> bool:
        return self.kind != "interval"

    @property
    def components(self) -> tuple:
        if self.kind == "interval":
            return ("left", "right")
        if self.kind == "ball":
            return ("outer",)
        return ("inner", "outer")

    def position(self, component: str) -> float:
        if component in ("left", "inner"):
            if self.kind == "ball":
                raise DomainError("a ball has no inner boundary")
            return self.lo
        if component in ("right", "outer"):
            return self.hi
        raise DomainError(f"unknown boundary component {component!r}")

    @property
    def diameter(self) -> float:
        return self.hi - self.lo if self.kind != "ball" else 2.0 * self.hi

    def distance(self, x, components: Sequence[str] = None) -> np.ndarray:
        """Distance from ``x`` to the nearest of ``components`` (default: all)."""
        x = np.asarray(x, dtype=float)
        comps = self.components if components is None else tuple(components)
        if not comps:
            comps = self.components
        d = np.full(x.shape, np.inf)
        for c in comps:
            d = np.minimum(d, np.abs(x - self.position(c)))
        return d


def _geometric_cells(length: float, ncells: int, first: float) -> np.ndarray:
    """Cell widths ``first * g**i`` (``g >= 1``) summing to ``length``."""
    if first * ncells >= length:
        raise DomainError(
            f"first cell {first} too large for {ncells} cells on length {length}"
        )

    def total(logg):
        x = ncells * logg
        if x > 30:
            lg = x + math.log1p(-math.exp(-x))
        else:
            lg = math.log(math.expm1(x))
        return math.log(first) + lg - math.log(math.expm1(logg)) - math.log(length)

    hi = 1.0 / ncells
    while total(hi) < 0:
        hi *= 2.0
    logg = brentq(total, 1e-14, hi, xtol=1e-15, rtol=1e-15)
    w = first * np.exp(logg * np.arange(ncells))
    return w * (length / w.sum())


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes in the (radial) coordinate.

    ``ratio`` is the width ratio of neighbouring cells measured toward the
    refined boundary (``1`` for uniform grids).
    """

    nodes: np.ndarray = field(repr=False)
    grading: str = "uniform"
    ratio: float = 1.0
    first_cell: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", x)
        if x.ndim != 1 or x.size < 10:
            raise DomainError("a grid needs at least 8 interior nodes")
        if np.any(np.diff(x) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if self.first_cell == 0.0:
            object.__setattr__(self, "first_cell", float(min(x[1] - x[0], x[-1] - x[-2])))

    def __len__(self):
        return self.nodes.size

    @property
    def n(self) -> int:
        return self.nodes.size

    @classmethod
    def uniform(cls, geometry: Geometry, n: int) -> "Grid":
        return cls(np.linspace(geometry.lo, geometry.hi, n), "uniform", 1.0)

    @classmethod
    def graded(cls, geometry: Geometry, n: int, first_cell: float, toward: Sequence[str]) -> "Grid":
        """Geometric grading toward the listed boundary components.

        Two-sided grading splits the cells evenly and mirrors the layer.
        """
        toward = tuple(toward)
        L = geometry.hi - geometry.lo
        ncells = n - 1
        lo_side = any(c in ("left", "inner") for c in toward)
        hi_side = any(c in ("right", "outer") for c in toward)
        if lo_side and hi_side:
            half = ncells // 2
            w = _geometric_cells(L / 2.0, half, first_cell)
            w2 = _geometric_cells(L / 2.0, ncells - half, first_cell)
            widths = np.concatenate([w, w2[::-1]])
        elif lo_side:
            widths = _geometric_cells(L, ncells, first_cell)
        elif hi_side:
            widths = _geometric_cells(L, ncells, first_cell)[::-1]
        else:
            return cls.uniform(geometry, n)
        x = geometry.lo + np.concatenate([[0.0], np.cumsum(widths)])
        x[-1] = geometry.hi
        g = widths[1] / widths[0] if lo_side else widths[-2] / widths[-1]
        return cls(x, "geometric", float(1.0 / g), float(first_cell))

    def restrict(self, lo: float = -np.inf, hi: float = np.inf) -> "Grid":
        keep = (self.nodes >= lo) & (self.nodes <= hi)
        return Grid(self.nodes[keep], self.grading, self.ratio, 0.0)
