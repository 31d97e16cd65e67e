import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from largesol.errors import BracketError, DomainError, ResolutionError
from largesol.karamata import KWeight
from largesol.nonlinearity import Nonlinearity
from largesol.solver import (
    AsymptoticBC,
    BlowUp,
    Dirichlet,
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
    write_field,
    write_schedule_log,
)

CUBIC = Nonlinearity.power(3)
UNIT = Geometry.interval(0.0, 1.0)


def u_quad(x):
    return 1.0 + x * (1.0 - x)


def quad_spec():
    # u'' = u^3 - r with u* = 1 + x(1-x), u*'' = -2
    return ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(1.0), "right": Dirichlet(1.0)},
                       source=lambda x: u_quad(x) ** 3 + 2.0)


def exp_spec():
    # u* = e^x: r = e^{3x} - e^x >= 0
    return ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(1.0), "right": Dirichlet(math.e)},
                       source=lambda x: np.exp(3 * x) - np.exp(x))


def ball_spec():
    # u* = cosh r in the unit ball of R^3, b = 5: r = 5 cosh^3 - cosh - 2 sinh(r)/r
    def src(x):
        x = np.asarray(x, dtype=float)
        sinc = np.where(x > 0, np.sinh(x) / np.where(x > 0, x, 1.0), 1.0)
        return 5 * np.cosh(x) ** 3 - np.cosh(x) - 2 * sinc

    return ProblemSpec(Geometry.ball(3, 1.0), CUBIC, {"outer": Dirichlet(math.cosh(1.0))},
                       c=5.0, source=src)


def convergence_orders(spec, exact, sizes):
    errs = []
    for n in sizes:
        g = Grid.uniform(spec.geometry, n)
        errs.append(np.max(np.abs(solve_dirichlet(spec, g).values - exact(g.nodes))))
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


# geometry and grids ---------------------------------------------------------


def test_geometry_validation():
    with pytest.raises(DomainError):
        Geometry.interval(1.0, 0.0)
    with pytest.raises(DomainError):
        Geometry.annulus(1, 1.0, 2.0)
    with pytest.raises(DomainError):
        Geometry.annulus(2, 2.0, 1.0)
    assert Geometry.ball(3, 2.0).diameter == 4.0
    assert Geometry.annulus(2, 1, 2).components == ("inner", "outer")


def test_grid_needs_eight_interior_nodes():
    with pytest.raises(DomainError):
        Grid.uniform(UNIT, 9)
    assert Grid.uniform(UNIT, 10).n == 10


@pytest.mark.parametrize("toward", [("left",), ("right",), ("left", "right")])
def test_graded_grid_properties(toward):
    g = Grid.graded(UNIT, 801, 1e-6, toward)
    h = np.diff(g.nodes)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert 0.0 < g.ratio < 1.0
    if toward == ("left",):
        assert h[0] == pytest.approx(1e-6, rel=1e-9)
        assert np.all(np.diff(h) > 0)
    elif toward == ("right",):
        assert h[-1] == pytest.approx(1e-6, rel=1e-9)
        assert np.all(np.diff(h) < 0)
    else:
        assert h[0] == pytest.approx(h[-1], rel=1e-9)


def test_graded_grid_rejects_oversized_first_cell():
    with pytest.raises(DomainError):
        Grid.graded(UNIT, 100, 0.02, ("left",))


def test_spec_validation():
    with pytest.raises(DomainError):
        ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(1.0)})
    with pytest.raises(DomainError):
        ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(1.0), "right": Dirichlet(1.0)}, p=1.0)
    with pytest.raises(DomainError):
        Dirichlet(-1.0)
    bad_source = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(1.0), "right": Dirichlet(1.0)},
                             source=lambda x: -np.ones_like(x))
    with pytest.raises(DomainError):
        solve_dirichlet(bad_source, Grid.uniform(UNIT, 20))


# residual --------------------------------------------------------------------


def test_residual_of_quadratic_manufactured_solution():
    g = Grid.uniform(UNIT, 256)
    assert np.max(np.abs(assemble_residual(quad_spec(), g, u_quad(g.nodes)))) < 1e-3


def test_residual_of_zero_field_vanishes():
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(0.0), "right": Dirichlet(0.0)})
    g = Grid.uniform(UNIT, 64)
    assert np.all(assemble_residual(spec, g, np.zeros(64)) == 0.0)


@pytest.mark.parametrize("spec, exact", [(exp_spec(), np.exp), (ball_spec(), np.cosh)])
def test_residual_is_second_order(spec, exact):
    # the quadratic u* is reproduced exactly by the stencil, so use a smooth non-polynomial one
    norms = []
    for n in (65, 129, 257):
        g = Grid.uniform(spec.geometry, n)
        norms.append(np.max(np.abs(assemble_residual(spec, g, exact(g.nodes)))))
    for a, b in zip(norms, norms[1:]):
        assert a / b == pytest.approx(4.0, rel=0.1)


def test_residual_on_graded_grid_is_consistent():
    g = Grid.graded(UNIT, 400, 1e-4, ("left",))
    r = assemble_residual(exp_spec(), g, np.exp(g.nodes))
    assert np.max(np.abs(r)) < 1e-2


def test_residual_rejects_negative_values():
    g = Grid.uniform(UNIT, 32)
    u = np.ones(32)
    u[5] = -0.1
    with pytest.raises(DomainError, match="node 5"):
        assemble_residual(quad_spec(), g, u)


# Dirichlet solves ------------------------------------------------------------


def test_zero_data_gives_zero_solution():
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(0.0), "right": Dirichlet(0.0)})
    fld = solve_dirichlet(spec, Grid.uniform(UNIT, 50))
    assert np.all(fld.values == 0.0)


def test_manufactured_solution_recovered():
    g = Grid.uniform(UNIT, 512)
    fld = solve_dirichlet(quad_spec(), g)
    assert np.max(np.abs(fld.values - u_quad(g.nodes))) < 1e-5
    assert fld.residual_norm < 1e-10


def test_symmetric_data_gives_symmetric_solution():
    geom = Geometry.interval(-1.0, 1.0)
    spec = ProblemSpec(geom, CUBIC, {"left": Dirichlet(10.0), "right": Dirichlet(10.0)})
    u = solve_dirichlet(spec, Grid.uniform(geom, 401)).values
    assert np.max(np.abs(u - u[::-1])) < 1e-10


@pytest.mark.parametrize("spec, exact", [(exp_spec(), np.exp), (ball_spec(), np.cosh)])
def test_discretization_order_two(spec, exact):
    for order in convergence_orders(spec, exact, (33, 65, 129)):
        assert order == pytest.approx(2.0, abs=0.2)


def test_annulus_manufactured_solution():
    # u* = 1/r is harmonic in R^2 only up to -1/r^3; r = b u*^3 - Δu* = 1/r^3 - 1/r^3 = 0 with b = 1
    geom = Geometry.annulus(2, 1.0, 2.0)
    spec = ProblemSpec(geom, CUBIC, {"inner": Dirichlet(1.0), "outer": Dirichlet(0.5)})
    g = Grid.uniform(geom, 201)
    assert np.max(np.abs(solve_dirichlet(spec, g).values - 1.0 / g.nodes)) < 1e-4


@pytest.mark.parametrize("a", [-5.0, 0.0, 5.0])
def test_sublinear_term_of_either_sign_converges(a):
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(3.0), "right": Dirichlet(0.0)}, a=a, p=0.5)
    fld = solve_dirichlet(spec, Grid.uniform(UNIT, 200))
    assert fld.residual_norm < 1e-10
    assert np.all(fld.values[1:-1] > 0)


def test_random_initial_guesses_agree():
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(4.0), "right": Dirichlet(1.0)}, a=2.0)
    g = Grid.uniform(UNIT, 300)
    rng = np.random.default_rng(1)
    sols = [solve_dirichlet(spec, g, u_init=np.exp(rng.normal(0, 1, g.n))).values for _ in range(5)]
    assert max(np.max(np.abs(s - sols[0])) for s in sols) < 1e-8


@settings(max_examples=25, deadline=None)
@given(lo=st.floats(0.0, 5.0), extra=st.floats(0.0, 5.0), right=st.floats(0.0, 5.0),
       a=st.floats(-5.0, 5.0))
@example(lo=0.0, extra=0.0, right=0.0, a=2.0)
def test_comparison_principle_in_boundary_data(lo, extra, right, a):
    spec = ProblemSpec(UNIT, Nonlinearity.power(2), {"left": Dirichlet(1.0), "right": Dirichlet(1.0)},
                       a=a, p=0.5, source=lambda x: 0.1 + 0 * x)
    g = Grid.uniform(UNIT, 80)
    u2 = solve_dirichlet(spec, g, {"left": lo, "right": right}).values
    u1 = solve_dirichlet(spec, g, {"left": lo + extra, "right": right}).values
    assert np.all(u2 <= u1 + 1e-10 * np.maximum(1.0, u1))


@pytest.mark.parametrize("a", [2.0, 5.0])
def test_zero_data_with_strong_growth_term_converges(a):
    # Newton alone collapses toward u = 0 where a u**p is singular
    spec = ProblemSpec(UNIT, Nonlinearity.power(2), {"left": Dirichlet(0.0), "right": Dirichlet(0.0)},
                       a=a, p=0.5, source=lambda x: 0.1 + 0 * x)
    g = Grid.uniform(UNIT, 80)
    fld = solve_dirichlet(spec, g)
    assert fld.meta.get("started_from") == "monotone"
    assert fld.residual_norm < 1e-10
    assert np.all(fld.values[1:-1] > 0)
    sup = np.where((g.nodes > 0) & (g.nodes < 1), 10.0, 0.0)
    ref = monotone_iteration(spec, g, np.zeros(g.n), sup)
    assert np.max(np.abs(fld.values - ref.values)) < 1e-9


def test_monotone_iteration_with_zero_boundary_data():
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(0.0), "right": Dirichlet(0.0)},
                       source=lambda x: 1.0 + 0 * x)
    g = Grid.uniform(UNIT, 60)
    sup = np.where((g.nodes > 0) & (g.nodes < 1), 1.0, 0.0)
    fld = monotone_iteration(spec, g, np.zeros(g.n), sup)
    assert fld.values[0] == 0.0 and fld.values[-1] == 0.0
    assert np.max(np.abs(fld.values - solve_dirichlet(spec, g).values)) < 1e-10


def test_dirichlet_solver_refuses_blowup_components():
    spec = ProblemSpec(UNIT, CUBIC, {"left": BlowUp(), "right": Dirichlet(1.0)})
    with pytest.raises(DomainError):
        solve_dirichlet(spec, Grid.uniform(UNIT, 20))


# monotone iteration ----------------------------------------------------------


def _simple_problem():
    spec = ProblemSpec(UNIT, CUBIC, {"left": Dirichlet(2.0), "right": Dirichlet(2.0)})
    return spec, Grid.uniform(UNIT, 101)


def test_monotone_iteration_reaches_newton_solution():
    spec, g = _simple_problem()
    newton = solve_dirichlet(spec, g).values
    # the constant 2 is a super-solution: 0 - 8 <= 0
    fld = monotone_iteration(spec, g, np.zeros(g.n), np.full(g.n, 2.0))
    assert fld.meta["super_is_supersolution"]
    assert np.max(np.abs(fld.values - newton)) < 1e-8


def test_monotone_iteration_from_newton_super():
    spec, g = _simple_problem()
    newton = solve_dirichlet(spec, g).values
    fld = monotone_iteration(spec, g, np.zeros(g.n), newton)
    assert np.max(np.abs(fld.values - newton)) < 1e-10


def test_monotone_iteration_fixed_point_in_one_step():
    spec, g = _simple_problem()
    exact = solve_dirichlet(spec, g).values
    fld = monotone_iteration(spec, g, exact, exact)
    assert fld.iterations == 1


def test_monotone_iteration_detects_inverted_bracket():
    spec, g = _simple_problem()
    with pytest.raises(BracketError):
        monotone_iteration(spec, g, np.full(g.n, 3.0), np.full(g.n, 2.0))


def test_monotone_iteration_rejects_too_low_super():
    spec, g = _simple_problem()
    # super below the solution: iterates must climb, which breaks monotonicity
    with pytest.raises(BracketError):
        monotone_iteration(spec, g, np.zeros(g.n), np.full(g.n, 0.5))


# blow-up problems -----------------------------------------------------------


@pytest.fixture(scope="module")
def classical_run():
    spec = ProblemSpec(UNIT, CUBIC, {"left": BlowUp(), "right": Dirichlet(math.sqrt(2.0))})
    g = make_grid(spec, 2000)
    return spec, g, solve_blowup(spec, g, keep_stages=True)


def test_schedule_reproduces_exact_solution(classical_run):
    spec, g, fld = classical_run
    x = g.nodes
    w = (x >= 0.01) & (x <= 0.1)
    assert np.max(np.abs(fld.values[w] * x[w] / math.sqrt(2.0) - 1.0)) < 0.02


def test_schedule_is_monotone(classical_run):
    stages = classical_run[2].meta["stages"]
    for lo, hi in zip(stages, stages[1:]):
        assert np.all(lo <= hi + 1e-10 * np.maximum(1.0, np.abs(hi)))


def test_schedule_log_records(classical_run, tmp_path):
    spec, g, fld = classical_run
    log = fld.schedule_log
    assert [r["stage"] for r in log] == list(range(len(log)))
    assert log[-1]["core_gap"] < 1e-6
    assert all(b["M"] == 2 * a["M"] for a, b in zip(log, log[1:]))
    write_schedule_log(tmp_path / "s.csv", log)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "stage,M,core_gap,newton_iterations" and len(lines) == len(log) + 1


def test_field_export(classical_run, tmp_path):
    fld = classical_run[2]
    write_field(tmp_path / "f.dat", fld)
    data = np.loadtxt(tmp_path / "f.dat")
    assert data.shape == (fld.grid.n, 3)
    assert np.array_equal(data[:, 2], fld.values)
    assert np.array_equal(data[:, 1], fld.distance)


def _shifted_gap(m1, m2, x=0.1):
    # u(0) = M is close to sqrt(2)/(x + sqrt(2)/M); the gap peaks at the core edge
    return (x + math.sqrt(2.0) / m1) / (x + math.sqrt(2.0) / m2) - 1.0


@pytest.mark.parametrize("m0", [1e3, 1e4])
def test_core_gap_between_large_stages(m0):
    spec = ProblemSpec(UNIT, CUBIC, {"left": BlowUp(), "right": Dirichlet(math.sqrt(2.0))})
    g = make_grid(spec, 2000)
    fld = solve_blowup(spec, g, Schedule(m0=m0, growth=10.0, max_stages=2, tol_interior=0.1))
    gap = fld.schedule_log[-1]["core_gap"]
    assert gap == pytest.approx(_shifted_gap(m0, 10 * m0), rel=0.05)
    if m0 >= 1e4:
        assert gap < 1.5e-3


def test_asymptotic_mode_agrees_with_schedule(classical_run):
    spec, g, fld = classical_run
    asym = solve_blowup(spec, g, AsymptoticBC())
    xs, us = fld.core(0.1)
    xa, ua = asym.core(0.1)
    assert np.array_equal(xs, xa)
    assert np.max(np.abs(us - ua) / us) < 1e-3


def test_asymptotic_mode_needs_two_cells(classical_run):
    spec, g, _ = classical_run
    with pytest.raises(ResolutionError):
        solve_blowup(spec, g, AsymptoticBC(delta=1.5 * g.first_cell))


def test_schedule_exhaustion_reports_trace(classical_run):
    from largesol.errors import NonConvergenceError

    spec, g, _ = classical_run
    with pytest.raises(NonConvergenceError) as info:
        solve_blowup(spec, g, Schedule(max_stages=3))
    assert len(info.value.report["trace"]) == 3


def test_ball_blowup_solution_is_radial_and_large():
    geom = Geometry.ball(3, 1.0)
    spec = ProblemSpec(geom, CUBIC, {"outer": BlowUp()})
    g = make_grid(spec, 1500)
    fld = solve_blowup(spec, g)
    assert np.all(np.diff(fld.values) > 0)
    assert fld.values[0] > 0


@pytest.fixture(scope="module")
def mixed_run():
    geom = Geometry.annulus(2, 1.0, 2.0)
    spec = ProblemSpec(geom, CUBIC, {"inner": BlowUp(), "outer": Dirichlet(0.0)})
    return solve_mixed(spec, make_grid(spec, 2000))


def test_mixed_outer_boundary_is_exactly_zero(mixed_run):
    mn, mx = mixed_run
    assert mn.values[-1] == 0.0 and mx.values[-1] == 0.0


def test_mixed_minimal_and_maximal_agree(mixed_run):
    mn, mx = mixed_run
    assert mx.meta["core_gap"] < 1e-3
    trace = mx.meta["trace"]
    assert all(b["gap"] <= a["gap"] + 1e-4 for a, b in zip(trace, trace[1:]))


def test_mixed_requires_annulus():
    spec = ProblemSpec(UNIT, CUBIC, {"left": BlowUp(), "right": Dirichlet(0.0)})
    with pytest.raises(DomainError):
        solve_mixed(spec, make_grid(spec, 200))


@pytest.mark.parametrize("seed", range(5))
def test_majorant_bounds_every_schedule_stage(seed):
    rng = np.random.default_rng(seed)
    spec = ProblemSpec(UNIT, Nonlinearity.power(float(rng.uniform(2.0, 4.0))),
                       {"left": BlowUp(), "right": Dirichlet(float(rng.uniform(0.5, 2.0)))},
                       a=float(rng.uniform(-3, 3)), p=0.5, c=float(rng.uniform(0.5, 3.0)),
                       k=KWeight.power(float(rng.uniform(0.0, 1.0))))
    g = make_grid(spec, 1500)
    # steep profiles (u ~ d^-(2+2 gamma)/rho) need faster growth than the default doubling
    fld = solve_blowup(spec, g, Schedule(growth=10.0), keep_stages=True)
    maj = constant_majorant(spec, g, boundary_value=fld.meta["M"])
    assert np.all(np.isfinite(maj.values))
    for stage in fld.meta["stages"]:
        assert np.all(stage <= maj.values + 1e-8 * np.maximum(1.0, maj.values))


def test_majorant_dominates_constant_coefficient_problem(classical_run):
    spec, g, fld = classical_run
    maj = constant_majorant(spec, g, boundary_value=fld.meta["M"])
    assert np.all(maj.values >= fld.values - 1e-10 * np.maximum(1.0, fld.values))
    assert np.all(np.isfinite(maj.values[1:-1]))


def test_majorant_in_schedule_mode():
    spec = ProblemSpec(UNIT, CUBIC, {"left": BlowUp(), "right": Dirichlet(1.0)})
    g = make_grid(spec, 1000)
    maj = constant_majorant(spec, g)
    assert maj.schedule_log is not None
