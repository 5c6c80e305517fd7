import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ac_estimates.constants import j_decay
from ac_estimates.geometry import WarpedGeometry
from ac_estimates.integral_curvature import (
    CurvatureError,
    JFlowError,
    check_integral_curvature_bound,
    fit_j_decay,
    j_envelope_feasible,
    k_quantity,
    perturbed_warp,
    ricci_minus,
    simpson,
    solve_j_equation,
)
from ac_estimates.sweep import BoundaryFamily, SweepMember, run_sweep
from ac_estimates.verify import VerifyError


@pytest.mark.parametrize("geometry", [WarpedGeometry.euclidean(2, 3.0), WarpedGeometry.euclidean(4, 3.0),
                                      WarpedGeometry.spherical(3, 1.0, r_max=2.0)])
def test_k_vanishes_on_nonnegative_ricci(geometry):
    rep = k_quantity(geometry, 3, 2.0)
    assert rep.k == 0.0 and rep.integral == 0.0 and rep.volume > 0


@pytest.mark.parametrize("p,R", [(1.5, 1.0), (2, 2.0), (5, 3.0)])
def test_k_on_hyperbolic_plane(p, R):
    assert k_quantity(WarpedGeometry.hyperbolic(2, 3.0), p, R).k == pytest.approx(R**2, abs=1e-10)


def test_k_with_positive_K_on_flat_space():
    # Ric^-_K = (n-1) K everywhere
    assert k_quantity(WarpedGeometry.euclidean(3, 2.0), 2, 2.0, K=0.5).k == pytest.approx(4.0, abs=1e-10)


def _trapezoid_k(amplitude, p, R, nodes=200001):
    r = np.linspace(0.0, R, nodes)
    a = amplitude
    s, c = np.sinh(r), np.cosh(r)
    g = 1 + a * r**2 * np.exp(-r)
    g1 = a * (2 * r - r**2) * np.exp(-r)
    g2 = a * (2 - 4 * r + r**2) * np.exp(-r)
    f = s * g
    f2 = s * g + 2 * c * g1 + s * g2
    q = np.empty_like(r)
    q[1:] = f2[1:] / f[1:]
    q[0] = 1 + 6 * a   # limit of f''/f at the pole
    weight = f
    num = np.trapezoid(np.maximum(q, 0) ** p * weight, r)
    den = np.trapezoid(weight, r)
    return R**2 * (num / den) ** (1 / p)


def test_k_perturbed_matches_oracles(derived):
    geo = WarpedGeometry.custom(2, perturbed_warp(0.01), 2.0)
    k = k_quantity(geo, 2, 2.0).k
    assert k == pytest.approx(_trapezoid_k(0.01, 2, 2.0), rel=1e-6)
    assert k == pytest.approx(derived["k_perturbed_sinh_0p01_p2_R2"], rel=1e-12)


def test_simpson_order():
    geo = WarpedGeometry.custom(2, perturbed_warp(0.01), 2.0)
    ref = k_quantity(geo, 2, 2.0, intervals=8192).k
    errs = [abs(k_quantity(geo, 2, 2.0, intervals=m).k - ref) for m in (16, 32, 64)]
    assert min(math.log2(a / b) for a, b in zip(errs, errs[1:])) >= 3.9


def test_simpson_rule_exact_on_cubics():
    x = np.linspace(0, 2, 5)
    assert simpson(x**3 - x, 0.5) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(CurvatureError):
        simpson(np.ones(4), 0.1)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.25, 4.0), R=st.floats(0.5, 3.0))
def test_k_scale_invariant(lam, R):
    base = WarpedGeometry.custom(2, perturbed_warp(0.05), 3.0)
    expr = f"{lam!r}*sinh(r/{lam!r})*(1 + 0.05*(r/{lam!r})**2*exp(-r/{lam!r}))"
    scaled = WarpedGeometry.custom(2, expr, 3.0 * lam)
    assert k_quantity(scaled, 2, lam * R).k == pytest.approx(k_quantity(base, 2, R).k, rel=1e-8, abs=1e-12)


def test_k_monotone_in_bump_amplitude():
    values = [k_quantity(WarpedGeometry.custom(2, perturbed_warp(a, "euclidean"), 3.0), 2, 3.0).k
              for a in (0.0, 0.01, 0.1, 0.5, 1.0, 3.0)]
    assert values[0] == 0.0
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_k_report_fields():
    rep = k_quantity(WarpedGeometry.hyperbolic(2, 2.0), 2, 2.0)
    assert rep.error_estimate >= 0 and rep.nodes == 2049
    assert "pole" in rep.center


def test_k_rejects_bad_input():
    geo = WarpedGeometry.hyperbolic(3, 2.0)
    with pytest.raises(CurvatureError):
        k_quantity(geo, 1.5, 1.0)
    with pytest.raises(CurvatureError):
        k_quantity(geo, 2, 3.0)
    with pytest.raises(CurvatureError):
        k_quantity(geo, 2, 1.0, intervals=10)


def test_ricci_minus_nonnegative():
    geo = WarpedGeometry.custom(3, perturbed_warp(0.5), 3.0)
    r = np.linspace(0.01, 3.0, 50)
    assert np.all(ricci_minus(geo, r, K=0.2) >= 0)


@pytest.mark.parametrize("convention", ["multiplicative", "as-written"])
def test_jflow_trivial_when_ricci_nonnegative(convention):
    state = solve_j_equation(WarpedGeometry.euclidean(2, 2.0), 0.1, 2.0, 1.0, convention, M=64)
    assert np.all(state.J == 1.0)


@pytest.mark.parametrize("convention,T", [("multiplicative", 1.0), ("as-written", 0.2)])
def test_jflow_bounds_on_hyperbolic_plane(convention, T):
    state = solve_j_equation(WarpedGeometry.hyperbolic(2, 2.0), 0.1, 2.0, T, convention, M=64)
    assert np.all(state.J > 0) and np.all(state.J <= 1)
    assert np.all(state.J[0] == 1.0) and np.all(state.J[:, -1] == 1.0)
    assert np.all(np.diff(state.J, axis=0) <= 1e-15)
    assert state.min_J[-1] < 1.0
    assert state.times[-1] == pytest.approx(T)


def test_jflow_as_written_quenches():
    # a source that does not vanish with J drives J to 0 in finite time; the run must fail loudly
    with pytest.raises(JFlowError):
        solve_j_equation(WarpedGeometry.hyperbolic(2, 2.0), 0.1, 2.0, 1.0, "as-written", M=64)


def test_jflow_as_written_decays_at_least_as_fast():
    geo = WarpedGeometry.hyperbolic(2, 2.0)
    mult = solve_j_equation(geo, 0.1, 2.0, 0.2, "multiplicative", M=64)
    raw = solve_j_equation(geo, 0.1, 2.0, 0.2, "as-written", M=64)
    # source 2 Ric^- >= 2 Ric^- J since J <= 1
    assert np.all(raw.J[-1] <= mult.J[-1] + 1e-12)


def test_jflow_fitted_decay_constant():
    geo = WarpedGeometry.hyperbolic(2, 2.0)
    state = solve_j_equation(geo, 0.1, 2.0, 1.0, M=64)
    k = k_quantity(geo, 2, 2.0).k
    C = fit_j_decay(state, k, 2, 2)
    assert C is not None and C > 0
    assert j_envelope_feasible(state, k, 2, 2, C)
    assert np.all(state.min_J >= j_decay(0.1, k, 2, 2, 2.0, state.times, C))


def test_jflow_rejects_bad_input():
    geo = WarpedGeometry.hyperbolic(2, 2.0)
    with pytest.raises(JFlowError):
        solve_j_equation(geo, 0.25, 2.0, 1.0)
    with pytest.raises(JFlowError):
        solve_j_equation(geo, 0.1, 2.0, 1.0, "other")
    with pytest.raises(JFlowError):
        solve_j_equation(geo, 0.1, 3.0, 1.0)


def _bump_members(amplitudes, radii=(0.5, 1.0, 1.5)):
    members = []
    for a in amplitudes:
        geo = {"dim": 2, "warp": {"kind": "custom", "expr": perturbed_warp(a, "euclidean")}}
        for R in radii:
            members.append(SweepMember(geo, {"preset": "allen_cahn"}, R, BoundaryFamily("constant", 0.5),
                                       label=f"bump-{a:g}"))
    return members


def test_integral_curvature_bound_on_flat_and_tiny_bump():
    results = run_sweep(_bump_members([0.0, 0.001]), workers=1, nodes_per_unit=128)
    reports, excluded = check_integral_curvature_bound(results, p=2, k_threshold=0.1)
    assert not excluded and all(r.passed for r in reports)


def test_integral_curvature_bound_filter_excludes_large_bumps():
    results = run_sweep(_bump_members([0.0, 5.0]), workers=1, nodes_per_unit=128)
    reports, excluded = check_integral_curvature_bound(results, p=2, k_threshold=0.1)
    assert {key["geometry"] for key, _ in excluded} == {"bump-5"}
    assert all(k > 0.1 for _, k in excluded)
    with pytest.raises(VerifyError):
        check_integral_curvature_bound(results, p=2, k_threshold=-1.0)
