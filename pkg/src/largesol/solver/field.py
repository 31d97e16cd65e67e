"""Discrete solution container and its text exports."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Grid

__all__ = ["DiscreteField", "write_field", "write_schedule_log", "SCHEDULE_COLUMNS"]

SCHEDULE_COLUMNS = ("stage", "M", "core_gap", "newton_iterations")


@dataclass(eq=False)
class DiscreteField:
    """Nodal values on a grid.

    ``distance`` holds ``d(x)`` at the nodes (distance to the blow-up
    components).  ``schedule_log`` is filled by the boundary-data schedule.
    """

    grid: Grid
    values: np.ndarray
    distance: np.ndarray
    residual_norm: float
    iterations: int
    schedule_log: Optional[list] = None
    meta: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def core(self, d_core: float):
        """``(nodes, values)`` restricted to ``d >= d_core``."""
        mask = self.distance >= d_core
        return self.nodes[mask], self.values[mask]


def write_field(path, fld: DiscreteField) -> None:
    """Three columns ``x d(x) u``, one node per line, round-trip precision."""
    with open(path, "w") as fh:
        for x, d, u in zip(fld.nodes, fld.distance, fld.values):
            fh.write(f"{float(x)!r} {float(d)!r} {float(u)!r}\n")


def write_schedule_log(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEDULE_COLUMNS)
        for rec in log or ():
            w.writerow([rec["stage"], repr(float(rec["M"])),
                        repr(float(rec["core_gap"])), rec["newton_iterations"]])
