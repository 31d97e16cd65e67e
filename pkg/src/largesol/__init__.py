"""Large (boundary blow-up) solutions of ``Δu + a u**p = b(x) f(u)``.

Submodules: :mod:`karamata` (regular variation, boundary weights),
:mod:`nonlinearity` (reaction terms, Keller-Osserman), :mod:`asymptotics`
(profile ``h`` and rate ``xi0``), :mod:`solver`, :mod:`verify`, :mod:`cli`.
"""

__version__ = "0.1.0"

from .asymptotics import BlowupProfile, compute_h, h_derivatives, verify_h_limit, xi0, xi_pm
from .errors import *  # noqa: F401,F403
from .karamata import KWeight, RVFunction, ell_limits, karamata_limit, rv_index_estimate
from .nonlinearity import Nonlinearity, keller_osserman, phi_tail, primitive_F
from .solver import (
    AsymptoticBC,
    BlowUp,
    Dirichlet,
    DiscreteField,
    Geometry,
    Grid,
    ProblemSpec,
    Schedule,
    assemble_residual,
    constant_majorant,
    make_grid,
    monotone_iteration,
    solve_blowup,
    solve_dirichlet,
    solve_mixed,
)
from .verify import comparison_suite, fit_boundary_rate, sweep_a, uniqueness_check
