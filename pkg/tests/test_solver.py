import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ac_estimates.equations import EquationSpec, equilibrium
from ac_estimates.geometry import WarpedGeometry
from ac_estimates.solver import (
    NewtonConfig,
    RadialGrid,
    RadialSolution,
    SolverError,
    ball_stats,
    grad_log_norm,
    newton_solve_radial,
    residual_radial,
    solve_ball,
    solve_closed_sphere,
    solve_polar,
)

LINEAR = EquationSpec(0.0, 1.0, 0.0, 1.0)   # Delta u = u


def _manufactured_residuals(Ms):
    out = []
    for M in Ms:
        grid = RadialGrid(WarpedGeometry.euclidean(1, 1.0), 1.0, M)
        u = np.cosh(grid.r)
        out.append(float(np.max(np.abs(residual_radial(grid.geometry, LINEAR, grid, u)))))
    return out


def test_manufactured_solution_order():
    res = _manufactured_residuals([64, 128, 256])
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 1.9


@pytest.mark.parametrize("geometry", [WarpedGeometry.euclidean(2, 3.0), WarpedGeometry.hyperbolic(3, 3.0),
                                      WarpedGeometry.spherical(2, 1.0, r_max=2.0)])
def test_equilibrium_residual_is_zero(geometry):
    grid = RadialGrid.default(geometry, nodes_per_unit=64)
    spec = EquationSpec(2.0, 1.0, 1.0, 3.0)
    u = np.full(grid.M + 1, equilibrium(spec))
    assert np.max(np.abs(residual_radial(geometry, spec, grid, u))) <= 1e-12


@pytest.mark.parametrize("geometry", [WarpedGeometry.euclidean(3, 2.0), WarpedGeometry.hyperbolic(2, 2.0),
                                      WarpedGeometry.custom(2, "r", 2.0, drift_expr="0.1*r", m=4)])
def test_equilibrium_input_takes_zero_iterations(geometry):
    sol = solve_ball(geometry, EquationSpec.allen_cahn(), 2.0, 1.0, nodes_per_unit=64)
    assert sol.converged and sol.iterations == 0
    assert sol.residual <= 1e-12
    assert np.all(sol.u == 1.0)


def test_residual_rejects_non_positive_values():
    grid = RadialGrid(WarpedGeometry.euclidean(2, 1.0), 1.0, 32)
    u = np.ones(33)
    u[3] = 0.0
    with pytest.raises(SolverError):
        residual_radial(grid.geometry, EquationSpec.allen_cahn(), grid, u)


def test_grid_invariants():
    grid = RadialGrid.default(WarpedGeometry.euclidean(2, 3.0), nodes_per_unit=100)
    assert grid.M >= 32 and grid.h * grid.M == pytest.approx(grid.radius, rel=1e-15)
    with pytest.raises(SolverError):
        RadialGrid(WarpedGeometry.euclidean(2, 1.0), 1.0, 16)
    with pytest.raises(SolverError):
        NewtonConfig(tol=0.0)


def test_converged_solution_is_self_consistent():
    geo = WarpedGeometry.hyperbolic(3, 3.0)
    sol = solve_ball(geo, EquationSpec.allen_cahn(), 3.0, 0.4, nodes_per_unit=128)
    assert sol.converged and np.all(sol.u > 0)
    res = residual_radial(geo, sol.spec, sol.grid, sol.u, boundary=0.4)
    assert np.max(np.abs(res)) <= sol.tol_effective
    assert sol.residual <= sol.tol_effective


def test_hyperbolic_center_matches_oracle(derived):
    sol = solve_ball(WarpedGeometry.hyperbolic(2, 8.0), EquationSpec.allen_cahn(), 8.0, 5.0)
    assert sol.converged
    assert abs(sol.center - 1.0) < 0.05
    assert sol.center == pytest.approx(derived["hyperbolic_n2_R8_b5_center"], abs=1e-6)


def test_euclidean_profile_in_unit_interval_and_monotone(derived):
    sol = solve_ball(WarpedGeometry.euclidean(2, 6.0), EquationSpec.allen_cahn(), 6.0, 0.2)
    assert sol.converged
    assert np.all((sol.u > 0) & (sol.u < 1))
    assert derived["euclid_n2_R6_b0p2_monotone"]
    assert np.all(np.diff(sol.u) <= 0)
    assert sol.center == pytest.approx(derived["euclid_n2_R6_b0p2_center"], abs=1e-5)


def test_cauchy_in_h():
    geo = WarpedGeometry.hyperbolic(2, 2.0)
    spec = EquationSpec.allen_cahn()
    sols = [newton_solve_radial(geo, spec, RadialGrid(geo, 2.0, M), 0.3) for M in (64, 128, 256)]
    diffs = [float(np.max(np.abs(a.u - b.u[::2]))) for a, b in zip(sols, sols[1:])]
    # differences between successive grids are the O(h^2) discretisation error
    assert math.log2(diffs[0] / diffs[1]) > 1.9
    assert diffs[1] < 1e-4


def test_polar_matches_radial():
    geo = WarpedGeometry.euclidean(2, 1.0)
    spec = EquationSpec.fisher_kpp()
    radial = solve_ball(geo, spec, 1.0, 0.5, M=128)
    polar = solve_polar(geo, spec, lambda th: np.full_like(th, 0.5), M=128, J=32)
    assert polar.converged and radial.converged
    assert np.max(np.abs(polar.values - radial.u[:, None])) <= 1e-8


def test_polar_hyperbolic_matches_radial():
    geo = WarpedGeometry.hyperbolic(2, 2.0)
    spec = EquationSpec.allen_cahn()
    radial = solve_ball(geo, spec, 2.0, 2.0, M=96)
    polar = solve_polar(geo, spec, np.full(24, 2.0), M=96, J=24)
    assert np.max(np.abs(polar.values - radial.u[:, None])) <= 1e-8


def test_polar_invariants():
    geo = WarpedGeometry.euclidean(2, 1.0)
    sol = solve_polar(geo, EquationSpec.fisher_kpp(), lambda th: 1 + 0.5 * np.cos(th), M=64, J=32)
    assert sol.converged and np.all(sol.values > 0)
    assert np.ptp(sol.values[0]) <= 1e-12
    per = sol.periodic_values
    assert np.array_equal(per[:, 0], per[:, -1])
    # reflection symmetry of the data in theta
    assert np.max(np.abs(sol.values[:, 1:] - sol.values[:, :0:-1])) <= 1e-10


def test_polar_equilibrium_data():
    geo = WarpedGeometry.hyperbolic(2, 1.0)
    sol = solve_polar(geo, EquationSpec.allen_cahn(), lambda th: np.ones_like(th), M=32, J=16)
    assert sol.iterations == 0 and np.all(sol.values == 1.0)


def test_polar_rejects_bad_input():
    with pytest.raises(SolverError):
        solve_polar(WarpedGeometry.euclidean(3, 1.0), EquationSpec.allen_cahn(), np.ones(16))
    with pytest.raises(SolverError):
        solve_polar(WarpedGeometry.euclidean(2, 1.0), EquationSpec.allen_cahn(), -np.ones(16), M=32, J=16)


@pytest.mark.parametrize("initial", [3.0, lambda r: 1 + 0.3 * np.cos(r)])
def test_closed_sphere_allen_cahn_reaches_one(initial):
    sol = solve_closed_sphere(1.0, EquationSpec.allen_cahn(), initial, M=128)
    assert sol.converged and not sol.nonconstant
    assert np.max(np.abs(sol.u - 1.0)) <= 1e-8


def test_closed_sphere_fisher_kpp():
    sol = solve_closed_sphere(1.0, EquationSpec.fisher_kpp(2.0), lambda r: 0.2 + np.sin(r / 2) ** 2, M=128)
    assert sol.converged and np.max(np.abs(sol.u - 1.0)) <= 1e-8


def test_closed_sphere_rejects_non_positive_initial():
    with pytest.raises(SolverError):
        solve_closed_sphere(1.0, EquationSpec.allen_cahn(), lambda r: np.cos(r), M=64)


def test_lane_emden_scaling_identity():
    geo = WarpedGeometry.euclidean(2, 1.0)
    s = 2.0
    spec = EquationSpec.lane_emden(1.0, s=s)
    sol = solve_ball(geo, spec, 1.0, 1.0, M=128)
    assert sol.converged
    base = residual_radial(geo, spec, sol.grid, sol.u)
    for lam in (0.5, 3.0):
        scaled = EquationSpec(spec.a * lam ** (1 - s), 0.0, s, spec.t)
        res = residual_radial(geo, scaled, sol.grid, lam * sol.u)
        assert np.max(np.abs(res - lam * base)) <= 1e-9 * lam
        assert np.max(np.abs(res)) <= lam * sol.tol_effective


def test_continuation_counts_and_positivity():
    sol = solve_ball(WarpedGeometry.hyperbolic(2, 6.0), EquationSpec.allen_cahn(), 6.0, 0.05,
                     nodes_per_unit=128)
    assert sol.converged and np.all(sol.u > 0)
    assert sol.clipped >= 0 and isinstance(sol.clipped, int)
    assert sol.guess in ("boundary-mean", "equilibrium", "continuation")


def _solution(u, r):
    grid = RadialGrid(WarpedGeometry.euclidean(1, float(r[-1])), float(r[-1]), len(r) - 1)
    return RadialSolution(grid, EquationSpec.allen_cahn(), u, float(u[-1]), 0, 0.0, True, 0, 1e-10)


def test_grad_log_norm_constant_and_exponential():
    r = np.linspace(0, 1, 129)
    assert np.all(grad_log_norm(_solution(np.full(129, 2.0), r)) == 0.0)
    lam = 1.5
    field = grad_log_norm(_solution(np.exp(lam * r), r))
    h = r[1]
    assert np.max(np.abs(field[1:] - lam**2)) <= 5 * lam**4 * h**2


def test_grad_log_norm_matches_shooting_derivative():
    from ac_estimates.shooting import solve_shooting
    geo = WarpedGeometry.hyperbolic(2, 3.0)
    spec = EquationSpec.allen_cahn()
    oracle = solve_shooting(geo, spec, 3.0, 0.5, dense=True)
    errs = []
    for M in (192, 384):
        sol = newton_solve_radial(geo, spec, RadialGrid(geo, 3.0, M), 0.5)
        inner = (sol.r > 0.01) & (sol.r < 2.9)
        exact = (oracle.du(sol.r[inner]) / oracle.u(sol.r[inner])) ** 2
        errs.append(float(np.max(np.abs(grad_log_norm(sol)[inner] - exact))))
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_ball_stats():
    r = np.linspace(0, 2, 65)
    stats = ball_stats(_solution(np.ones(65), r), 1.0)
    assert (stats.sup_u, stats.inf_u, stats.sup_grad_log_sq) == (1.0, 1.0, 0.0)
    sol = solve_ball(WarpedGeometry.euclidean(2, 2.0), EquationSpec.allen_cahn(), 2.0, 0.5, M=128)
    stats = ball_stats(sol, 1.0)
    assert stats.sup_u >= stats.inf_u > 0
    with pytest.raises(SolverError):
        ball_stats(sol, 3.0)


@settings(max_examples=15, deadline=None)
@given(b=st.floats(0.1, 4.0), R=st.floats(0.5, 3.0))
def test_accepted_solutions_are_positive(b, R):
    sol = solve_ball(WarpedGeometry.hyperbolic(2, R), EquationSpec.allen_cahn(), R, b, nodes_per_unit=64)
    assert sol.converged
    assert np.all(sol.u > 0)
    assert min(b, 1.0) - 1e-9 <= sol.u.min() and sol.u.max() <= max(b, 1.0) + 1e-9
