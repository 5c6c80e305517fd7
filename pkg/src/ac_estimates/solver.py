"""Finite-difference solvers for Delta_V u + a u^s - b u^t = 0.

Radial solutions use the warped-product reduction

    u'' + ((n-1) f'/f + v) u' + a u^s - b u^t = 0,    u'(0) = 0,

on a uniform grid with a ghost node at the pole (where the Laplacian is
n u''(0)).  Balls carry a Dirichlet row at the outer radius; the closed
sphere carries a second pole instead.  The 2D polar solver uses the
five-point stencil with an averaging row at the pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .equations import EquationSpec, equilibrium, has_equilibrium
from .geometry import WarpedGeometry

EPS = np.finfo(float).eps
DEFAULT_NODES_PER_UNIT = 512
MAX_RADIAL_NODES = 2**15
MIN_RADIAL_NODES = 32


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 60
    floor_fraction: float = 1e-8
    continuation: bool = True
    max_line_search: int = 40
    ptc_max_iter: int = 2000

    def __post_init__(self):
        if not self.tol > 0:
            raise SolverError("tolerance must be positive")
        if not self.floor_fraction > 0:
            raise SolverError("positivity floor must be positive")

    @classmethod
    def from_config(cls, cfg: dict | None) -> "NewtonConfig":
        if not cfg:
            return cls()
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(cfg) - allowed - {"nodes_per_unit", "M", "polar_radial", "polar_angular"}
        if unknown:
            raise SolverError(f"unknown solver options: {sorted(unknown)}")
        return cls(**{k: v for k, v in cfg.items() if k in allowed})


@dataclass(frozen=True)
class RadialGrid:
    geometry: WarpedGeometry
    radius: float
    M: int

    def __post_init__(self):
        if self.M < MIN_RADIAL_NODES:
            raise SolverError(f"radial grids need M >= {MIN_RADIAL_NODES}")
        if self.radius > self.geometry.r_max * (1 + 1e-12):
            raise SolverError("grid radius exceeds the geometry's r_max")

    @classmethod
    def default(cls, geometry: WarpedGeometry, radius: float | None = None,
                nodes_per_unit: int = DEFAULT_NODES_PER_UNIT) -> "RadialGrid":
        radius = geometry.r_max if radius is None else radius
        M = int(min(MAX_RADIAL_NODES, max(MIN_RADIAL_NODES, math.ceil(nodes_per_unit * radius))))
        return cls(geometry, radius, M)

    @property
    def h(self) -> float:
        return self.radius / self.M

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.h

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.geometry, self.radius, self.M * factor)


@dataclass
class RadialSolution:
    grid: RadialGrid
    spec: EquationSpec
    u: np.ndarray
    boundary: float | None
    iterations: int
    residual: float
    converged: bool
    clipped: int
    tol_effective: float
    history: list = field(default_factory=list)
    guess: str = ""
    message: str = ""
    closed: bool = False
    nonconstant: bool = False

    @property
    def geometry(self) -> WarpedGeometry:
        return self.grid.geometry

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def center(self) -> float:
        return float(self.u[0])

    def summary(self) -> dict:
        return {
            "kind": "closed-sphere" if self.closed else "radial",
            "M": self.grid.M,
            "radius": self.grid.radius,
            "h": self.grid.h,
            "boundary": self.boundary,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "tol_effective": self.tol_effective,
            "clipped_steps": self.clipped,
            "initial_guess": self.guess,
            "u_center": float(self.u[0]),
            "u_min": float(np.min(self.u)),
            "u_max": float(np.max(self.u)),
            "nonconstant": self.nonconstant,
            "message": self.message,
        }


@dataclass
class PolarSolution:
    geometry: WarpedGeometry
    spec: EquationSpec
    radius: float
    M: int
    J: int
    values: np.ndarray          # shape (M + 1, J); row 0 is the pole
    boundary_profile: np.ndarray
    iterations: int
    residual: float
    converged: bool
    clipped: int
    tol_effective: float
    history: list = field(default_factory=list)
    guess: str = ""
    message: str = ""

    @property
    def h(self) -> float:
        return self.radius / self.M

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.h

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.J) * (2 * math.pi / self.J)

    @property
    def periodic_values(self) -> np.ndarray:
        return np.concatenate([self.values, self.values[:, :1]], axis=1)

    def summary(self) -> dict:
        return {
            "kind": "polar",
            "M": self.M,
            "J": self.J,
            "radius": self.radius,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "tol_effective": self.tol_effective,
            "clipped_steps": self.clipped,
            "initial_guess": self.guess,
            "u_center": float(self.values[0, 0]),
            "u_min": float(np.min(self.values)),
            "u_max": float(np.max(self.values)),
            "message": self.message,
        }


# -- radial operator --------------------------------------------------------

def _radial_operator(geometry: WarpedGeometry, grid: RadialGrid, closed: bool = False):
    """Tridiagonal coefficients (lower, diag, upper) of the linear part.

    Row 0 is the pole; the last row is zero for a Dirichlet ball or the
    second pole on the closed sphere.
    """
    M, h = grid.M, grid.h
    r = grid.r
    n = geometry.n
    lower = np.zeros(M + 1)
    upper = np.zeros(M + 1)
    ri = r[1:M]
    if n >= 2:
        c = (n - 1) * geometry.log_derivative(ri)
    else:
        c = np.zeros_like(ri)
    if geometry.has_drift:
        c = c + geometry.v(ri)
    lower[1:M] = 1.0 / h**2 - c / (2 * h)
    upper[1:M] = 1.0 / h**2 + c / (2 * h)
    # u'(0) = 0 with a mirrored ghost node
    upper[0] = 2.0 * n / h**2
    if closed:
        lower[M] = 2.0 * n / h**2
    diag = -(lower + upper)
    return lower, diag, upper


def _apply_tridiagonal(lower, diag, upper, u):
    # difference form: rows of the operator sum to zero, so constants give exactly 0
    du = np.diff(u)
    out = np.zeros_like(u)
    out[:-1] += upper[:-1] * du
    out[1:] -= lower[1:] * du
    return out


def _reaction_and_derivative(spec: EquationSpec, u):
    from .equations import _power  # exact integer powers
    us = _power(u, spec.s)
    ut = _power(u, spec.t)
    g = spec.a * us - spec.b * ut
    dg = spec.a * spec.s * us / u - spec.b * spec.t * ut / u
    scale = spec.a * us + spec.b * ut
    return g, dg, scale


def residual_radial(geometry: WarpedGeometry, spec: EquationSpec, grid: RadialGrid, u,
                    boundary: float | None = None, closed: bool = False) -> np.ndarray:
    """Discrete residual of Delta_V u + a u^s - b u^t at every node.

    Rows 0..M-1 are PDE rows; row M is the Dirichlet row u_M - boundary
    (``boundary`` defaults to u_M) or, on the closed sphere, the far pole.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.M + 1,):
        raise SolverError("u must have one value per grid node")
    if np.any(~(u > 0)):
        raise SolverError("residual is only defined for positive u")
    lower, diag, upper = _radial_operator(geometry, grid, closed)
    g, _, _ = _reaction_and_derivative(spec, u)
    res = _apply_tridiagonal(lower, diag, upper, u) + g
    if not closed:
        res[-1] = u[-1] - (u[-1] if boundary is None else boundary)
    return res


def _roundoff_floor(u, scale, h, n):
    # storing u perturbs each row by about eps * (sum of |coefficients| * |u| + |reaction|);
    # the pole row has the largest coefficient sum, 4n / h^2
    return 2.0 * EPS * (float(np.max(np.abs(u))) * 4.0 * max(n, 1) / h**2 + float(np.max(scale)))


class _Failure(Exception):
    pass


def _newton(F, jac_solve, u0, cfg: NewtonConfig, floor_value: float, tol_of,
            pde_mask=None, ptc: bool = False):
    """Damped Newton (or pseudo-transient continuation) on F(u) = 0.

    ``F(u)`` returns (residual, scale); ``jac_solve(u, rhs, shift)`` solves
    (J(u) - shift * diag(pde_mask)) x = rhs.  Returns a dict of diagnostics.
    """
    u = u0.copy()
    res, scale = F(u)
    norm = float(np.max(np.abs(res)))
    history = [norm]
    clipped = 0
    iterations = 0
    tau = 1.0
    max_iter = cfg.ptc_max_iter if ptc else cfg.max_iter
    message = ""
    converged = norm <= tol_of(u, scale)
    polished = norm == 0.0
    while iterations < max_iter:
        if converged and polished:
            break
        try:
            delta = jac_solve(u, -res, 1.0 / tau if ptc else 0.0)
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
            message = f"singular Jacobian: {exc}"
            break
        if not np.all(np.isfinite(delta)):
            message = "singular Jacobian: non-finite Newton step"
            break
        if converged:
            # one polishing step after the tolerance is met
            trial = u + delta
            if np.all(trial >= floor_value):
                rt, st = F(trial)
                nt = float(np.max(np.abs(rt)))
                if nt <= max(norm, tol_of(trial, st)):
                    u, res, scale, norm = trial, rt, st, nt
                    history.append(norm)
            polished = True
            continue
        iterations += 1
        lam = 1.0
        accepted = False
        clipped_here = False
        base2 = float(np.linalg.norm(res))
        for _ in range(cfg.max_line_search):
            trial = u + lam * delta
            if np.any(trial < floor_value):
                clipped_here = True
                if ptc:
                    tau *= 0.5
                    try:
                        delta = jac_solve(u, -res, 1.0 / tau)
                    except (np.linalg.LinAlgError, RuntimeError, ValueError):
                        break
                else:
                    lam *= 0.5
                continue
            rt, st = F(trial)
            nt2 = float(np.linalg.norm(rt))
            if ptc or nt2 <= (1.0 - 1e-4 * lam) * base2 or float(np.max(np.abs(rt))) <= tol_of(trial, st):
                accepted = True
                break
            lam *= 0.5
        if clipped_here:
            clipped += 1
        if not accepted:
            message = "line search failed"
            break
        if ptc:
            ratio = base2 / max(float(np.linalg.norm(rt)), 1e-300)
            tau = min(tau * min(max(ratio, 0.5), 10.0), 1e14)
        u, res, scale = trial, rt, st
        norm = float(np.max(np.abs(res)))
        history.append(norm)
        converged = norm <= tol_of(u, scale)
        polished = False
    if not converged and not message:
        message = "maximum iterations reached"
    return {
        "u": u, "residual": norm, "converged": converged, "iterations": iterations,
        "clipped": clipped, "history": history, "message": message,
        "tol": tol_of(u, scale),
    }


def _banded_solver(lower, diag, upper, dirichlet: bool, dg_fn):
    M1 = len(diag)

    def solve(u, rhs, shift):
        dg = dg_fn(u)
        ab = np.zeros((3, M1))
        d = diag + dg
        if shift:
            d = d - shift
        if dirichlet:
            d[-1] = 1.0
        ab[0, 1:] = upper[:-1]
        ab[1] = d
        ab[2, :-1] = lower[1:]
        if dirichlet:
            ab[2, -2] = 0.0  # the Dirichlet row has no off-diagonal entry
        return scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)

    return solve


def initial_guess_value(spec: EquationSpec, boundary_mean: float) -> tuple[float, str]:
    """Constant starting value: the equilibrium when within 50% of the data, else the data mean."""
    if has_equilibrium(spec):
        eq = equilibrium(spec)
        if abs(boundary_mean - eq) < 0.5 * eq:
            return eq, "equilibrium"
    return boundary_mean, "boundary-mean"


def _solve_radial_once(geometry, spec, grid, boundary, cfg, u0, closed=False):
    lower, diag, upper = _radial_operator(geometry, grid, closed)
    n = geometry.n
    h = grid.h

    def F(u):
        g, _, scale = _reaction_and_derivative(spec, u)
        res = _apply_tridiagonal(lower, diag, upper, u) + g
        if not closed:
            res[-1] = u[-1] - boundary
        return res, scale

    def dg_fn(u):
        _, dg, _ = _reaction_and_derivative(spec, u)
        if not closed:
            dg = dg.copy()
            dg[-1] = 0.0
        return dg

    def tol_of(u, scale):
        return max(cfg.tol, _roundoff_floor(u, scale, h, n))

    solve = _banded_solver(lower, diag, upper, not closed, dg_fn)
    data_min = min(float(np.min(u0)), boundary if boundary is not None else np.inf)
    floor_value = cfg.floor_fraction * data_min
    if closed:
        mask = np.ones(grid.M + 1)
    else:
        mask = np.ones(grid.M + 1)
        mask[-1] = 0.0

    def solve_shifted(u, rhs, shift):
        if not shift:
            return solve(u, rhs, 0.0)
        # pseudo-transient shift only on PDE rows
        return _banded_solver(lower, diag - shift * mask + 0.0, upper, not closed, dg_fn)(u, rhs, 0.0)

    return _newton(F, solve_shifted, u0, cfg, floor_value, tol_of, ptc=closed)


def newton_solve_radial(geometry: WarpedGeometry, spec: EquationSpec, grid: RadialGrid,
                        boundary: float, config: NewtonConfig | None = None,
                        initial=None) -> RadialSolution:
    """Solve the Dirichlet problem u(radius) = boundary on a geodesic ball.

    Falls back to continuation in the boundary value (from the equilibrium,
    where the constant is an exact solution) when Newton fails from the
    default starting guess.
    """
    cfg = config or NewtonConfig()
    boundary = float(boundary)
    if not boundary > 0:
        raise SolverError("boundary value must be positive")
    if geometry.closed:
        raise SolverError("use solve_closed_sphere for the closed model")
    if initial is None:
        value, guess = initial_guess_value(spec, boundary)
        u0 = np.full(grid.M + 1, value)
    else:
        u0 = np.asarray(initial, dtype=float).copy()
        guess = "user"
    out = _solve_radial_once(geometry, spec, grid, boundary, cfg, u0)
    total = out["iterations"]
    clipped = out["clipped"]
    history = list(out["history"])
    if not out["converged"] and cfg.continuation and has_equilibrium(spec):
        eq = equilibrium(spec)
        u = np.full(grid.M + 1, eq)
        lam, step = 0.0, 0.5
        guess = "continuation"
        while lam < 1.0 and step > 2.0**-20:
            target = min(1.0, lam + step)
            b = eq ** (1 - target) * boundary**target
            trial = _solve_radial_once(geometry, spec, grid, b, cfg, u)
            total += trial["iterations"]
            clipped += trial["clipped"]
            if trial["converged"]:
                u, lam, out = trial["u"], target, trial
                history.extend(trial["history"])
                step = min(2 * step, 1.0)
            else:
                step *= 0.5
        if lam < 1.0:
            out = dict(out, converged=False, message="continuation stalled")
    return RadialSolution(
        grid=grid, spec=spec, u=out["u"], boundary=boundary, iterations=total,
        residual=out["residual"], converged=out["converged"], clipped=clipped,
        tol_effective=out["tol"], history=history, guess=guess, message=out["message"],
    )


def solve_ball(geometry: WarpedGeometry, spec: EquationSpec, radius: float, boundary: float,
               config: NewtonConfig | None = None,
               nodes_per_unit: int = DEFAULT_NODES_PER_UNIT, M: int | None = None) -> RadialSolution:
    """Convenience wrapper: default grid on B(radius)."""
    if M is None:
        grid = RadialGrid.default(geometry, radius, nodes_per_unit)
    else:
        grid = RadialGrid(geometry, radius, M)
    return newton_solve_radial(geometry, spec, grid, boundary, config)


def solve_closed_sphere(kappa: float, spec: EquationSpec, initial, config: NewtonConfig | None = None,
                        n: int = 2, M: int | None = None) -> RadialSolution:
    """Solve on the closed round sphere of curvature kappa, regular at both poles.

    ``initial`` is a callable of r or an array on the grid.  The iteration is
    Newton globalised by pseudo-transient continuation.  A converged
    non-constant solution is flagged in ``nonconstant``.
    """
    cfg = config or NewtonConfig()
    geometry = WarpedGeometry.spherical(n, kappa, closed=True)
    if M is None:
        M = int(max(MIN_RADIAL_NODES, math.ceil(DEFAULT_NODES_PER_UNIT * geometry.r_max)))
    grid = RadialGrid(geometry, geometry.r_max, M)
    u0 = initial(grid.r) if callable(initial) else np.asarray(initial, dtype=float)
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), (M + 1,)).copy()
    if np.any(~(u0 > 0)):
        raise SolverError("initial profile must be positive")
    out = _solve_radial_once(geometry, spec, grid, None, cfg, u0, closed=True)
    u = out["u"]
    spread = float(np.max(u) - np.min(u))
    nonconstant = bool(out["converged"] and spread > 1e-6 * max(1.0, float(np.max(u))))
    message = out["message"]
    if nonconstant:
        message = "converged to a NON-CONSTANT solution on a closed manifold"
    return RadialSolution(
        grid=grid, spec=spec, u=u, boundary=None, iterations=out["iterations"],
        residual=out["residual"], converged=out["converged"], clipped=out["clipped"],
        tol_effective=out["tol"], history=out["history"], guess="user", message=message,
        closed=True, nonconstant=nonconstant,
    )


# -- polar solver -----------------------------------------------------------

@dataclass(frozen=True)
class _PolarStencil:
    M: int
    J: int
    h: float
    lo: np.ndarray     # coefficients of u[i-1] - u[i] for rows 1..M-1
    hi: np.ndarray     # coefficients of u[i+1] - u[i]
    ang: np.ndarray    # coefficient of the angular second difference
    matrix: sps.csr_matrix
    mask: np.ndarray
    bnd: np.ndarray

    def apply(self, vec):
        """Linear part in difference form (exactly zero on constants)."""
        M, J = self.M, self.J
        U = _to_grid(vec, M, J)
        out = np.zeros_like(U)
        out[0, 0] = 4.0 / self.h**2 * (np.mean(U[1]) - U[0, 0])
        mid = U[1:M]
        out[1:M] = (self.hi[:, None] * (U[2:] - mid) + self.lo[:, None] * (U[:M - 1] - mid)
                    + self.ang[:, None] * ((np.roll(mid, -1, axis=1) - mid) + (np.roll(mid, 1, axis=1) - mid)))
        res = np.empty(1 + M * J)
        res[0] = out[0, 0]
        res[1:] = out[1:].ravel()
        res[self.bnd] = vec[self.bnd]
        return res


def _polar_operator(geometry: WarpedGeometry, radius: float, M: int, J: int) -> _PolarStencil:
    h = radius / M
    dth = 2 * math.pi / J
    r = np.arange(M + 1) * h
    N = 1 + M * J
    ri = r[1:M]
    c = geometry.log_derivative(ri)
    if geometry.has_drift:
        c = c + geometry.v(ri)
    lo = 1.0 / h**2 - c / (2 * h)
    hi = 1.0 / h**2 + c / (2 * h)
    ang = 1.0 / (geometry.f(ri) ** 2 * dth**2)

    rows, cols, vals = [], [], []
    # pole: 4 (mean of first ring - u0) / h^2
    rows.append(np.zeros(J + 1, dtype=int))
    cols.append(np.arange(J + 1))
    vals.append(np.concatenate([[-4.0 / h**2], np.full(J, 4.0 / (h**2 * J))]))
    jj = np.arange(J)
    for k, i in enumerate(range(1, M)):
        me = 1 + (i - 1) * J + jj
        below = np.zeros(J, dtype=int) if i == 1 else me - J
        for nb, coef in ((me + J, hi[k]), (below, lo[k]),
                         (1 + (i - 1) * J + (jj + 1) % J, ang[k]),
                         (1 + (i - 1) * J + (jj - 1) % J, ang[k])):
            rows += [me, me]
            cols += [nb, me]
            vals += [np.full(J, coef), np.full(J, -coef)]
    bnd = 1 + (M - 1) * J + jj
    rows.append(bnd)
    cols.append(bnd)
    vals.append(np.ones(J))
    L = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(N, N))
    mask = np.ones(N)
    mask[bnd] = 0.0
    return _PolarStencil(M, J, h, lo, hi, ang, L, mask, bnd)


def _to_grid(vec, M, J):
    out = np.empty((M + 1, J))
    out[0] = vec[0]
    out[1:] = vec[1:].reshape(M, J)
    return out


def solve_polar(geometry: WarpedGeometry, spec: EquationSpec, boundary_profile,
                config: NewtonConfig | None = None, radius: float | None = None,
                M: int = 256, J: int = 128) -> PolarSolution:
    """Solve on a 2D geodesic disk with Dirichlet data g(theta) > 0.

    ``boundary_profile`` is a callable of theta or an array of J samples.
    """
    cfg = config or NewtonConfig()
    if geometry.n != 2:
        raise SolverError("the polar solver needs a 2-dimensional geometry")
    radius = geometry.r_max if radius is None else radius
    if radius > geometry.r_max * (1 + 1e-12):
        raise SolverError("disk radius exceeds the geometry's r_max")
    if M < MIN_RADIAL_NODES or J < 8:
        raise SolverError("polar grid too coarse")
    theta = np.arange(J) * (2 * math.pi / J)
    g = boundary_profile(theta) if callable(boundary_profile) else np.asarray(boundary_profile, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), (J,)).copy()
    if np.any(~(g > 0)):
        raise SolverError("boundary profile must be positive")
    stencil = _polar_operator(geometry, radius, M, J)
    L, mask, bnd = stencil.matrix, stencil.mask, stencil.bnd
    h = radius / M
    N = L.shape[0]

    def make_F(gvals):
        def F(u):
            gu, _, scale = _reaction_and_derivative(spec, u)
            res = stencil.apply(u) + gu * mask
            res[bnd] -= gvals
            return res, scale
        return F

    def jac_solve(u, rhs, shift):
        _, dg, _ = _reaction_and_derivative(spec, u)
        Jm = (L + sps.diags(dg * mask - shift * mask)).tocsc()
        return spla.spsolve(Jm, rhs)

    def tol_of(u, scale):
        dth = 2 * math.pi / J
        f1 = float(geometry.f(h))
        stiff = max(1.0 / h**2, 1.0 / (f1 * dth) ** 2)
        return max(cfg.tol, 2.0 * EPS * (float(np.max(np.abs(u))) * 4.0 * stiff + float(np.max(scale))))

    def run(gvals, u0):
        floor_value = cfg.floor_fraction * min(float(np.min(u0)), float(np.min(gvals)))
        return _newton(make_F(gvals), jac_solve, u0, cfg, floor_value, tol_of)

    value, guess = initial_guess_value(spec, float(np.mean(g)))
    u0 = np.full(N, value)
    out = run(g, u0)
    total, clipped = out["iterations"], out["clipped"]
    history = list(out["history"])
    if not out["converged"] and cfg.continuation and has_equilibrium(spec):
        eq = equilibrium(spec)
        u = np.full(N, eq)
        lam, step = 0.0, 0.5
        guess = "continuation"
        while lam < 1.0 and step > 2.0**-20:
            target = min(1.0, lam + step)
            trial = run(eq ** (1 - target) * g**target, u)
            total += trial["iterations"]
            clipped += trial["clipped"]
            if trial["converged"]:
                u, lam, out = trial["u"], target, trial
                history.extend(trial["history"])
                step = min(2 * step, 1.0)
            else:
                step *= 0.5
        if lam < 1.0:
            out = dict(out, converged=False, message="continuation stalled")
    return PolarSolution(
        geometry=geometry, spec=spec, radius=radius, M=M, J=J, values=_to_grid(out["u"], M, J),
        boundary_profile=g, iterations=total, residual=out["residual"], converged=out["converged"],
        clipped=clipped, tol_effective=out["tol"], history=history, guess=guess, message=out["message"],
    )


# -- derived fields ---------------------------------------------------------

def radial_derivative(u: np.ndarray, h: float, closed: bool = False) -> np.ndarray:
    """Centered first derivative; zero at poles, one-sided second order at a Dirichlet end."""
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    du[0] = 0.0
    if closed:
        du[-1] = 0.0
    else:
        du[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return du


def grad_log_norm(solution) -> np.ndarray:
    """|grad u|^2 / u^2 at every node."""
    if isinstance(solution, PolarSolution):
        U = solution.values
        h = solution.h
        dth = 2 * math.pi / solution.J
        ur = np.empty_like(U)
        ur[1:-1] = (U[2:] - U[:-2]) / (2 * h)
        ur[-1] = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * h)
        ut = (np.roll(U, -1, axis=1) - np.roll(U, 1, axis=1)) / (2 * dth)
        out = np.empty_like(U)
        f = solution.geometry.f(solution.r[1:])
        out[1:] = (ur[1:] ** 2 + (ut[1:] / f[:, None]) ** 2) / U[1:] ** 2
        th = solution.theta
        ring = U[1]
        gx = 2.0 / (solution.J * h) * np.sum(ring * np.cos(th))
        gy = 2.0 / (solution.J * h) * np.sum(ring * np.sin(th))
        out[0] = (gx**2 + gy**2) / U[0, 0] ** 2
        return out
    du = radial_derivative(solution.u, solution.grid.h, solution.closed)
    return (du / solution.u) ** 2


@dataclass(frozen=True)
class BallStats:
    sup_u: float
    inf_u: float
    sup_grad_log_sq: float

    @property
    def log_ratio(self) -> float:
        return math.log(self.sup_u / self.inf_u)


def ball_stats(solution, R: float) -> BallStats:
    """Discrete sup u, inf u and sup |grad ln u|^2 over nodes with r <= R."""
    if isinstance(solution, PolarSolution):
        r, U, radius = solution.r, solution.values, solution.radius
    else:
        r, U, radius = solution.r, solution.u, solution.grid.radius
    if R > radius * (1 + 1e-12) or R < 0:
        raise SolverError(f"ball radius {R} exceeds the solution domain {radius}")
    inside = r <= R * (1 + 1e-12) + 1e-14
    vals = U[inside]
    grad = grad_log_norm(solution)[inside]
    return BallStats(float(np.max(vals)), float(np.min(vals)), float(np.max(grad)))
