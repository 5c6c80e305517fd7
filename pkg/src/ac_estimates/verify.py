"""Numerical checks of the Bochner-type identities, gradient bounds,
Harnack ratios and Liouville behaviour on computed solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .equations import EquationSpec, equilibrium, has_equilibrium, reaction_quotient
from .geometry import WarpedGeometry, ricci_lower_bound
from .solver import (
    NewtonConfig,
    RadialGrid,
    RadialSolution,
    SolverError,
    newton_solve_radial,
    solve_closed_sphere,
)

BOUNDARY_LAYER = 3
VALIDATION_FACTOR = 1.5


class VerifyError(ValueError):
    pass


# -- identity checks ----------------------------------------------------------

@dataclass
class IdentityReport:
    kind: str
    beta: float
    h: list
    residuals: list
    orders: list
    terms: dict
    lhs_scale: float
    kk_violation: float | None = None
    m: float | None = None
    r: np.ndarray | None = field(default=None, repr=False)
    lhs: np.ndarray | None = field(default=None, repr=False)
    rhs: np.ndarray | None = field(default=None, repr=False)

    @property
    def residual(self) -> float:
        return self.residuals[-1]

    @property
    def order(self) -> float:
        return min(self.orders) if self.orders else math.nan

    def passed(self, min_order: float = 1.9, kk_tol: float = 1e-9) -> bool:
        ok = self.order >= min_order
        if self.kk_violation is not None:
            ok = ok and self.kk_violation <= kk_tol
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "beta": self.beta, "m": self.m,
            "h": list(self.h), "residuals": list(self.residuals), "orders": list(self.orders),
            "order": self.order, "terms": dict(self.terms), "lhs_scale": self.lhs_scale,
            "kk_violation": self.kk_violation,
        }


def _pole_aware_product(q, dg, d2g):
    """(f'/f) g' with the pole limit g''(0)."""
    out = q * dg
    out[0] = d2g[0]
    return out


def _radial_derivatives(y, h):
    """Centered y', y'' on nodes 0..M-1 with even reflection at the pole."""
    d1 = np.zeros(len(y) - 1)
    d2 = np.zeros(len(y) - 1)
    d1[1:] = (y[2:] - y[:-2]) / (2 * h)
    d2[1:] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    d2[0] = 2 * (y[1] - y[0]) / h**2
    return d1, d2


def identity_terms(geometry: WarpedGeometry, spec: EquationSpec, u, h: float, beta: float,
                   drift_form: bool = False, m: float | None = None) -> dict:
    """Both sides of the Bochner identity for F = |grad w|^2 / w^2, w = u^(-beta).

    Arrays cover nodes 0..M-1-BOUNDARY_LAYER.  ``drift_form`` selects the
    weighted identity (Laplacian Delta_V, Bakry-Emery Ricci) and also
    evaluates the pointwise Hessian inequality with parameter ``m``.
    """
    n = geometry.n
    u = np.asarray(u, dtype=float)
    M = len(u) - 1
    r = np.arange(M + 1) * h
    w = u ** (-beta)
    dw, d2w = _radial_derivatives(w, h)
    wi = w[:-1]
    F = np.zeros(M)
    F[1:] = (dw[1:] / wi[1:]) ** 2
    dF, d2F = _radial_derivatives(F, h)
    keep = slice(0, M - 1 - BOUNDARY_LAYER)
    # restrict everything to nodes whose stencils are interior
    r, u, w = r[keep], u[keep], wi[keep]
    dw, d2w, F, dF, d2F = dw[keep], d2w[keep], F[keep], dF[keep], d2F[keep]

    q = np.zeros_like(r)
    if n >= 2:
        q[1:] = geometry.log_derivative(r[1:])
    v = geometry.v(r) if geometry.has_drift else np.zeros_like(r)
    q_dw = _pole_aware_product(q, dw, d2w)
    q_dF = _pole_aware_product(q, dF, d2F)

    lhs = d2F + (n - 1) * q_dF + v * dF
    hess2 = d2w**2 + (n - 1) * q_dw**2
    lap_w = d2w + (n - 1) * q_dw
    ric = -(n - 1) * geometry.curvature_quotient(r) * dw**2 if n >= 2 else np.zeros_like(r)
    grad_term = 2 * (1 / beta - 1) * dF * dw / w

    if drift_form:
        if m is None or not m > n:
            raise VerifyError("the weighted identity needs m > n")
        ric_v = ric - geometry.dv(r) * dw**2 if geometry.has_drift else ric
        lin = 2 * (spec.a * (1 - spec.s) * u ** (spec.s - 1) - spec.b * (1 - spec.t) * u ** (spec.t - 1))
        terms = {
            "hessian": 2 * hess2 / w**2,
            "ricci": 2 * ric_v / w**2,
            "grad_F": grad_term,
            "F_linear": lin * F,
            "F_squared": -2 * F**2,
        }
        lap_v = lap_w + v * dw
        kk = lap_v**2 / m - (v * dw) ** 2 / (m - n) - hess2
        scale = np.maximum(hess2, lap_v**2 / m) + 1e-300
        kk_violation = float(np.max(kk / scale))
    else:
        G = reaction_quotient(spec, u)
        c4 = (spec.a * u ** (spec.s - 1) * (4 / n * (1 + beta) + 2 * (1 - spec.s))
              - spec.b * u ** (spec.t - 1) * (4 / n * (1 + beta) + 2 * (1 - spec.t)))
        terms = {
            "traceless_hessian": 2 * (hess2 - lap_w**2 / n) / w**2,
            "ricci": 2 * ric / w**2,
            "grad_F": grad_term,
            "F_linear": c4 * F,
            "F_squared": (2 / n * (1 + 1 / beta) ** 2 - 2) * F**2,
            "constant": 2 * beta**2 / n * G**2,
        }
        kk_violation = None
    rhs = sum(terms.values())
    return {"r": r, "lhs": lhs, "rhs": rhs, "terms": terms, "kk_violation": kk_violation}


def _refined_solutions(solution: RadialSolution, levels: int, config: NewtonConfig | None):
    if levels < 3:
        raise VerifyError("convergence order needs at least 3 refinement levels")
    if not solution.converged:
        raise VerifyError("identity checks need a converged solution")
    sols = [solution]
    grid = solution.grid
    for _ in range(levels - 1):
        grid = grid.refined(2)
        nxt = newton_solve_radial(solution.geometry, solution.spec, grid, solution.boundary, config)
        if not nxt.converged:
            raise VerifyError(f"refined solve failed on M = {grid.M}: {nxt.message}")
        sols.append(nxt)
    return sols


def _orders(residuals):
    out = []
    for a, b in zip(residuals, residuals[1:]):
        if a == 0.0 and b == 0.0:
            out.append(math.inf)
        elif b == 0.0:
            out.append(math.inf)
        else:
            out.append(math.log2(a / b))
    return out


def _identity_report(kind, solution, beta, levels, config, drift_form, m):
    if beta == 0:
        raise VerifyError("beta must be non-zero")
    if solution.geometry.n < 2:
        raise VerifyError("identity checks need n >= 2")
    sols = _refined_solutions(solution, levels, config)
    hs, residuals = [], []
    last = None
    kk = None
    # compare all levels on the coarse nodes that survive the boundary-layer cut,
    # so every level is measured at the same physical points
    coarse_count = solution.grid.M - 1 - BOUNDARY_LAYER
    for level, sol in enumerate(sols):
        out = identity_terms(sol.geometry, sol.spec, sol.u, sol.grid.h, beta, drift_form, m)
        common = slice(0, coarse_count * 2**level, 2**level)
        hs.append(sol.grid.h)
        residuals.append(float(np.max(np.abs(out["lhs"][common] - out["rhs"][common]))))
        if out["kk_violation"] is not None:
            kk = out["kk_violation"] if kk is None else max(kk, out["kk_violation"])
        last = out
    return IdentityReport(
        kind=kind, beta=beta, h=hs, residuals=residuals, orders=_orders(residuals),
        terms={k: float(np.max(np.abs(v))) for k, v in last["terms"].items()},
        lhs_scale=float(np.max(np.abs(last["lhs"]))), kk_violation=kk, m=m,
        r=last["r"], lhs=last["lhs"], rhs=last["rhs"],
    )


def check_identity(geometry: WarpedGeometry, solution: RadialSolution, beta: float,
                   levels: int = 3, config: NewtonConfig | None = None) -> IdentityReport:
    """Residual of the unweighted identity on h, h/2, h/4 re-solves of ``solution``."""
    if geometry != solution.geometry:
        raise VerifyError("solution was computed on a different geometry")
    return _identity_report("unweighted", solution, beta, levels, config, False, None)


def check_identity_drift(geometry: WarpedGeometry, solution: RadialSolution, beta: float,
                         m: float | None = None, levels: int = 3,
                         config: NewtonConfig | None = None) -> IdentityReport:
    """Weighted identity and the pointwise Hessian inequality for Delta_V."""
    if geometry != solution.geometry:
        raise VerifyError("solution was computed on a different geometry")
    m = geometry.m if m is None else m
    if m is None or not m > geometry.n:
        raise VerifyError("m <= n: the weighted check needs m > n")
    return _identity_report("weighted", solution, beta, levels, config, True, m)


def check_interval_inequality(solution: RadialSolution) -> tuple[float, float]:
    """For n = 1 and beta = 1: largest (4F^2 - F'')^+ and the scale of F''."""
    if solution.geometry.n != 1:
        raise VerifyError("the interval inequality is for n = 1")
    out = identity_terms(solution.geometry, solution.spec, solution.u, solution.grid.h, 1.0)
    F = out["terms"]["F_squared"]  # (2(1+1)^2 - 2) F^2 = 6 F^2; recover F^2
    F2 = F / 6.0
    gap = np.maximum(4 * F2 - out["lhs"], 0.0)
    return float(np.max(gap)), float(np.max(np.abs(out["lhs"])))


# -- algebraic inequality oracle ----------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    passed: bool
    worst_margin: float
    worst_u: float
    worst_X: float
    n: float
    beta: float
    L: float

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin, "worst_u": self.worst_u,
                "worst_X": self.worst_X, "n": self.n, "beta": self.beta, "L": self.L}


ORACLE_U = np.logspace(-3, 3, 200)
ORACLE_X = np.concatenate([[0.0], np.logspace(-6, 6, 199)])
ORACLE_RTOL = 1e-10


def beta_inequality_oracle(n: float, spec: EquationSpec, beta: float, L: float,
                           u_grid=None, x_grid=None) -> OracleResult:
    """Brute-force check of the quadratic inequality in X = F over a (u, X) grid.

    Margin: ((2/n)(1+1/beta)^2 - 2 - L) X^2 + C4(u) X + (2 beta^2/n) G(u)^2.
    Sampled margins are normalised by the sum of the absolute terms; a
    sample fails below -1e-10 relative.
    """
    u = ORACLE_U if u_grid is None else np.asarray(u_grid, dtype=float)
    X = ORACLE_X if x_grid is None else np.asarray(x_grid, dtype=float)
    if not (beta > 0 and L > 0):
        return OracleResult(False, -math.inf, math.nan, math.nan, n, beta, L)
    uu, XX = np.meshgrid(u, X, indexing="ij")
    pa = spec.a * uu ** (spec.s - 1)
    pb = spec.b * uu ** (spec.t - 1)
    G = pa - pb
    k = 4 / n * (1 + beta)
    c4 = pa * (k + 2 * (1 - spec.s)) - pb * (k + 2 * (1 - spec.t))
    quad = (2 / n * (1 + 1 / beta) ** 2 - 2 - L) * XX**2
    lin = c4 * XX
    const = 2 * beta**2 / n * G**2
    margin = quad + lin + const
    scale = np.abs(quad) + L * XX**2 + np.abs(lin) + const + 1e-300
    rel = margin / scale
    i, j = np.unravel_index(int(np.argmin(rel)), rel.shape)
    worst = float(rel[i, j])
    return OracleResult(bool(worst >= -ORACLE_RTOL), worst, float(u[i]), float(X[j]), n, beta, L)


# -- estimate reports -----------------------------------------------------------

@dataclass
class EstimateReport:
    quantity: str
    measured: float
    bound: float
    components: dict
    provenance: dict
    key: dict
    role: str = "check"
    note: str = ""

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return bool(self.margin >= 0)

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "measured": self.measured, "bound": self.bound,
                "margin": self.margin, "passed": self.passed, "role": self.role,
                "components": dict(self.components), "provenance": dict(self.provenance),
                "key": dict(self.key), "note": self.note}


def all_passed(reports) -> bool:
    return bool(reports) and all(r.passed for r in reports)


def _key_order(key: dict):
    # numbers sort numerically, everything else as text
    return tuple((k, (0, float(v), "") if isinstance(v, (int, float)) else (1, 0.0, str(v)))
                 for k, v in sorted(key.items()))


def split_members(results):
    """Deterministic alternating split of converged sweep results sorted by key."""
    results = [res for res in results if getattr(res, "converged", True)]
    if len(results) < 2:
        raise VerifyError("a fitted check needs at least two converged sweep members")
    keys = [_key_order(res.key) for res in results]
    if len(set(keys)) != len(keys):
        raise VerifyError("sweep keys must be unique")
    ordered = [res for _, res in sorted(zip(keys, results), key=lambda kv: kv[0])]
    return ordered[0::2], ordered[1::2]


def fit_max_ratio(measured, scales) -> float:
    ratios = [m / s for m, s in zip(measured, scales)]
    return max(ratios) if ratios else math.nan


def _scaling_fit(results, quantity, measure, scale, formula):
    train, validate = split_members(results)
    C = fit_max_ratio([measure(r) for r in train], [scale(r) for r in train])
    reports = []
    for role, group, factor in (("train", train, 1.0), ("validate", validate, VALIDATION_FACTOR)):
        for res in group:
            bound = factor * C * scale(res)
            reports.append(EstimateReport(
                quantity=quantity, measured=measure(res), bound=bound,
                components={"C_fit": C, "factor": factor, "scale": scale(res)},
                provenance={"C_fit": constants.IMPL_FITTED, "form": formula},
                key=res.key, role=role))
    return reports


def check_gradient_bound(results, mode: str = "scaling-fit") -> list:
    """sup over B(R) of |grad ln u|^2 against the gradient estimate.

    ``scaling-fit``: one max-ratio C over the training half for
    measured <= C (K + 1/R^2), validated at 1.5 C on the other half.
    ``global-A``: measured <= A(n, K) + slack with
    slack = c (1/R^2 + sqrt(K)/R) and c fitted on the training half of
    the excess over A.
    """
    if mode == "scaling-fit":
        return _scaling_fit(results, "sup_grad_log_sq", lambda r: r.stats.sup_grad_log_sq,
                            lambda r: r.K + 1.0 / r.R**2, "C (K + 1/R^2)")
    if mode != "global-A":
        raise VerifyError(f"unknown gradient-bound mode {mode!r}")
    train, validate = split_members(results)

    def excess(r):
        return max(r.stats.sup_grad_log_sq - constants.A_of(r.geometry.n, r.K), 0.0)

    def slack_scale(r):
        return 1.0 / r.R**2 + math.sqrt(r.K) / r.R

    c = fit_max_ratio([excess(r) for r in train], [slack_scale(r) for r in train])
    reports = []
    for role, group, factor in (("train", train, 1.0), ("validate", validate, VALIDATION_FACTOR)):
        for res in group:
            A = constants.A_of(res.geometry.n, res.K)
            slack = factor * c * slack_scale(res)
            reports.append(EstimateReport(
                quantity="sup_grad_log_sq", measured=res.stats.sup_grad_log_sq, bound=A + slack,
                components={"A": A, "slack": slack, "c_fit": c, "factor": factor},
                provenance={"A": constants.CLOSED_FORM, "slack": constants.IMPL_FITTED},
                key=res.key, role=role,
                note="" if res.stats.sup_grad_log_sq <= A else "excess over A attributed to finite R"))
    return reports


def check_harnack(results, mode: str = "scaling-fit") -> list:
    """ln(sup u / inf u) over B(R) against C (sqrt(K) R + 1), or sqrt(A) R + c."""
    if mode == "scaling-fit":
        return _scaling_fit(results, "log_harnack_ratio", lambda r: r.stats.log_ratio,
                            lambda r: math.sqrt(r.K) * r.R + 1.0, "C (sqrt(K) R + 1)")
    if mode != "global":
        raise VerifyError(f"unknown Harnack mode {mode!r}")
    train, validate = split_members(results)

    def explicit(r):
        return math.log(constants.harnack_global_bound(r.geometry.n, r.K, r.R))

    c = max(max(r.stats.log_ratio - explicit(r) for r in train), 0.0)
    reports = []
    for role, group, factor in (("train", train, 1.0), ("validate", validate, VALIDATION_FACTOR)):
        for res in group:
            reports.append(EstimateReport(
                quantity="log_harnack_ratio", measured=res.stats.log_ratio,
                bound=explicit(res) + factor * c,
                components={"sqrtA_R": explicit(res), "c_fit": c, "factor": factor},
                provenance={"sqrtA_R": constants.CLOSED_FORM, "c_fit": constants.IMPL_FITTED},
                key=res.key, role=role))
    return reports


# -- Liouville ------------------------------------------------------------------

def check_liouville(geometry: WarpedGeometry, spec: EquationSpec, radii, boundaries,
                    label: str | None = None, fixture: dict | None = None,
                    config: NewtonConfig | None = None, nodes_per_unit: int = 512) -> list:
    """Centre deviation |u(0) - eq| on B(R) for growing R and each boundary value.

    A row passes when its deviation is strictly below the previous radius'
    (or both are exactly zero) and, if a calibrated threshold exists, below
    it.  Unconverged solves are reported as failures with the reason.
    """
    from .shooting import load_fixture, threshold_for

    if not has_equilibrium(spec):
        raise VerifyError("Liouville checks need a, b > 0")
    eq = equilibrium(spec)
    if fixture is None and label is not None:
        fixture = load_fixture()
    radii = sorted(float(R) for R in radii)
    reports = []
    for b in boundaries:
        prev = None
        for R in radii:
            geo = geometry.with_r_max(R) if geometry.r_max != R else geometry
            grid = RadialGrid.default(geo, R, nodes_per_unit)
            key = {"label": label or geometry.warp_kind, "boundary": float(b), "R": R}
            try:
                sol = newton_solve_radial(geo, spec, grid, float(b), config)
            except SolverError as exc:
                reports.append(EstimateReport("center_deviation", math.inf, -math.inf, {}, {},
                                              key, note=f"solver error: {exc}"))
                prev = None
                continue
            dev = abs(sol.u[0] - eq)
            half = sol.r <= 0.5 * R
            half_dev = float(np.max(np.abs(sol.u[half] - eq)))
            threshold = threshold_for(label, float(b), R, fixture) if label else None
            limit = math.inf if threshold is None else threshold
            note = ""
            monotone = prev is None or dev < prev or (dev == 0.0 and prev == 0.0)
            if not sol.converged:
                monotone, note = False, f"not converged: {sol.message}"
            elif not monotone:
                note = "deviation did not decrease"
            bound = limit if monotone else -math.inf
            reports.append(EstimateReport(
                quantity="center_deviation", measured=dev, bound=bound,
                components={"threshold": threshold, "sup_dev_half_ball": half_dev,
                            "equilibrium": eq, "iterations": sol.iterations,
                            "initial_guess": sol.guess},
                provenance={"threshold": "shooting-oracle fixture" if threshold is not None else "none"},
                key=key, note=note))
            prev = dev
    return reports


@dataclass
class ClosedRun:
    amplitude: float
    coefficients: list
    converged: bool
    iterations: int
    max_deviation: float
    nonconstant: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ClosedLiouvilleReport:
    passed: bool
    seed: int
    kappa: float
    runs: list
    tolerance: float

    def to_dict(self) -> dict:
        return {"passed": self.passed, "seed": self.seed, "kappa": self.kappa,
                "tolerance": self.tolerance, "runs": [r.to_dict() for r in self.runs]}


def random_closed_profile(rng: np.random.Generator, kappa: float, modes: int = 3):
    """Log-uniform amplitude in [0.1, 10] times 1 + low-frequency cosines."""
    amplitude = float(np.exp(rng.uniform(math.log(0.1), math.log(10.0))))
    coeffs = [float(c) for c in rng.uniform(-0.3, 0.3, size=modes)]
    k = math.sqrt(kappa)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return amplitude * (1 + sum(c * np.cos((j + 1) * k * r) for j, c in enumerate(coeffs)))

    return amplitude, coeffs, profile


def check_closed_liouville(kappa: float, spec: EquationSpec, count: int = 5, seed: int = 0,
                           n: int = 2, tol: float = 1e-8,
                           config: NewtonConfig | None = None) -> ClosedLiouvilleReport:
    """Solve from ``count`` random positive profiles; all must reach the equilibrium."""
    if not has_equilibrium(spec):
        raise VerifyError("closed Liouville check needs a, b > 0")
    eq = equilibrium(spec)
    rng = np.random.default_rng(seed)
    runs = []
    for _ in range(count):
        amplitude, coeffs, profile = random_closed_profile(rng, kappa)
        sol = solve_closed_sphere(kappa, spec, profile, config, n=n)
        dev = float(np.max(np.abs(sol.u - eq)))
        runs.append(ClosedRun(amplitude, coeffs, sol.converged, sol.iterations, dev, sol.nonconstant))
    passed = all(r.converged and r.max_deviation <= tol for r in runs)
    return ClosedLiouvilleReport(passed, seed, kappa, runs, tol)


def member_curvature(geometry: WarpedGeometry, R: float) -> float:
    """K for a member solved on B(2R)."""
    return ricci_lower_bound(geometry, min(2 * R, geometry.r_max))
