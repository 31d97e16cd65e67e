"""Strict, declarative experiment configuration.

Files are YAML.  Unknown keys are rejected at every level so that a
misspelled parameter fails instead of silently taking its default.
"""

from __future__ import annotations

from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigurationError
from .karamata import KWeight
from .nonlinearity import Nonlinearity
from .solver import BlowUp, Dirichlet, Geometry, Grid, ProblemSpec, Schedule, make_grid

__all__ = [
    "ExperimentConfig",
    "load_config",
    "dump_config",
    "parse_nonlinearity",
    "MODES",
]

MODES = ("profile", "solve", "verify-rate", "sweep", "ko-check", "mixed")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IntervalCfg(_Strict):
    kind: Literal["interval"] = "interval"
    lo: float = 0.0
    hi: float = 1.0


class BallCfg(_Strict):
    kind: Literal["ball"]
    dim: int = 2
    radius: float = 1.0


class AnnulusCfg(_Strict):
    kind: Literal["annulus"]
    dim: int = 2
    r0: float = 1.0
    r1: float = 2.0


GeometryCfg = Annotated[Union[IntervalCfg, BallCfg, AnnulusCfg], Field(discriminator="kind")]


class NonlinearityCfg(_Strict):
    """``power`` (``u**q``), ``exponential``, ``power_log`` (``u**q log(1+u)``),
    ``log_power`` (``u log(1+u)**q``), ``linear`` and ``sqrt``."""

    kind: Literal["power", "exponential", "power_log", "log_power", "linear", "sqrt"] = "power"
    q: Optional[float] = 3.0

    @model_validator(mode="after")
    def _needs_q(self):
        if self.kind in ("power", "power_log", "log_power") and self.q is None:
            raise ValueError(f"{self.kind} needs q")
        return self

    def build(self) -> Nonlinearity:
        if self.kind == "power":
            return Nonlinearity.power(self.q)
        if self.kind == "linear":
            return Nonlinearity.power(1.0)
        if self.kind == "sqrt":
            return Nonlinearity.power(0.5)
        if self.kind == "exponential":
            return Nonlinearity.exponential()
        if self.kind == "power_log":
            return Nonlinearity.power_log(self.q)
        return Nonlinearity.log_power(self.q)


class WeightCfg(_Strict):
    kind: Literal["constant", "power", "exp_flat"] = "constant"
    gamma: float = 0.0
    nu: float = 1.0

    def build(self) -> KWeight:
        if self.kind == "constant":
            return KWeight.constant(self.nu)
        if self.kind == "power":
            return KWeight.power(self.gamma, self.nu)
        return KWeight.exp_flat(self.nu)


class PerturbationCfg(_Strict):
    """``amplitude * d**exponent``."""

    amplitude: float
    exponent: float = 0.0


class PotentialCfg(_Strict):
    c: float = 1.0
    k: WeightCfg = WeightCfg()
    perturbation: Optional[PerturbationCfg] = None


class SourceCfg(_Strict):
    """``constant`` (``value``) or ``polynomial`` (``coeffs`` in ascending powers of x)."""

    kind: Literal["constant", "polynomial"]
    value: float = 0.0
    coeffs: List[float] = []

    def build(self):
        if self.kind == "constant":
            v = self.value
            return lambda x: np.full(np.shape(x), v)
        c = np.asarray(self.coeffs[::-1], dtype=float)
        return lambda x: np.polyval(c, x)


class DirichletCfg(_Strict):
    dirichlet: float


BoundaryCfg = Union[Literal["blowup"], DirichletCfg]


class ProblemCfg(_Strict):
    geometry: GeometryCfg = IntervalCfg()
    a: float = 0.0
    p: float = 0.5
    f: NonlinearityCfg = NonlinearityCfg()
    potential: PotentialCfg = PotentialCfg()
    source: Optional[SourceCfg] = None
    boundary: Dict[str, BoundaryCfg] = {"left": "blowup", "right": DirichletCfg(dirichlet=2**0.5)}
    lift: float = 0.0

    def geometry_obj(self) -> Geometry:
        g = self.geometry
        if g.kind == "interval":
            return Geometry.interval(g.lo, g.hi)
        if g.kind == "ball":
            return Geometry.ball(g.dim, g.radius)
        return Geometry.annulus(g.dim, g.r0, g.r1)

    def build(self) -> ProblemSpec:
        pot = self.potential
        pert = None
        if pot.perturbation is not None:
            amp, ex = pot.perturbation.amplitude, pot.perturbation.exponent
            pert = lambda d: amp * np.asarray(d, dtype=float) ** ex  # noqa: E731
        bnd = {name: BlowUp() if cond == "blowup" else Dirichlet(cond.dirichlet)
               for name, cond in self.boundary.items()}
        return ProblemSpec(
            geometry=self.geometry_obj(), f=self.f.build(), boundary=bnd,
            a=self.a, p=self.p, c=pot.c, k=pot.k.build(), perturbation=pert,
            source=None if self.source is None else self.source.build(), lift=self.lift,
        )


class GridCfg(_Strict):
    """``auto`` grades toward blow-up components and is uniform otherwise."""

    n: int = Field(2000, ge=10)
    grading: Literal["auto", "uniform", "geometric"] = "auto"
    first_cell: Optional[float] = None

    def build(self, spec: ProblemSpec, d_core: Optional[float]) -> Grid:
        if self.grading == "uniform":
            return Grid.uniform(spec.geometry, self.n)
        if self.grading == "geometric" and not spec.blowup_components:
            raise ConfigurationError("geometric grading needs a blow-up component")
        return make_grid(spec, self.n, self.first_cell, d_core)


class ScheduleCfg(_Strict):
    m0: float = 10.0
    growth: float = 2.0
    max_stages: int = 40
    d_core: Optional[float] = None
    tol_interior: float = 1e-6

    def build(self) -> Schedule:
        return Schedule(self.m0, self.growth, self.max_stages, self.d_core, self.tol_interior)


class TolerancesCfg(_Strict):
    newton: float = 1e-10
    rate: float = 0.02
    mixed: float = 1e-3
    reference: float = 1e-5


class FitCfg(_Strict):
    window: Tuple[float, float] = (0.01, 0.1)


class ProfileCfg(_Strict):
    t_min: float = 1e-4
    t_max: float = 0.1
    per_decade: int = 64


class SweepCfg(_Strict):
    a_values: List[float] = [-1.0, 0.0, 1.0]


class ReferenceCfg(_Strict):
    """Exact solution as a polynomial in x (ascending coefficients)."""

    polynomial: List[float]


class ExperimentConfig(_Strict):
    mode: Literal[MODES] = "solve"
    problem: ProblemCfg = ProblemCfg()
    grid: GridCfg = GridCfg()
    schedule: ScheduleCfg = ScheduleCfg()
    tolerances: TolerancesCfg = TolerancesCfg()
    fit: FitCfg = FitCfg()
    profile: ProfileCfg = ProfileCfg()
    sweep: SweepCfg = SweepCfg()
    reference: Optional[ReferenceCfg] = None
    output: Optional[str] = None
    seed: int = 0


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return ExperimentConfig.model_validate(data if data is not None else {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def parse_nonlinearity(text: str) -> NonlinearityCfg:
    """``linear``, ``sqrt``, ``exponential``, ``power:Q``, ``power_log:Q``, ``log_power:Q``."""
    kind, _, q = text.partition(":")
    kind = kind.strip().replace("-", "_")
    if kind in ("linear", "sqrt", "exponential"):
        if q:
            raise ValueError(f"{kind} takes no parameter")
        return NonlinearityCfg(kind=kind, q=None)
    return NonlinearityCfg(kind=kind, q=float(q) if q else None)
