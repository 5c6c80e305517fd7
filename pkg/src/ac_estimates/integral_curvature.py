"""Integral curvature quantities and the auxiliary J-flow.

k(p, R, K) = R^2 (|B(R)|^-1 int_B (Ric_K^-)^p)^(1/p) with
Ric_K^- = ((n-1)K - rho)^+, rho the lowest Ricci eigenvalue, computed
about the pole of a warped model.  The J-flow is the radial reduction of

    dJ/dt = Delta J - 5 |grad J|^2 / (delta J) - 2 Ric^- (J or 1),

J = 1 initially and on the boundary sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import constants
from .geometry import GeometryError, WarpedGeometry, ricci_radial

CENTER_NOTE = "centre fixed at the pole of the model"
CONVENTIONS = ("multiplicative", "as-written")


class CurvatureError(ValueError):
    pass


class JFlowError(RuntimeError):
    pass


def ricci_minus(geometry: WarpedGeometry, r, K: float = 0.0):
    """((n-1)K - rho(r))^+ with rho the smaller Ricci eigenvalue."""
    rho_rad, rho_tan = ricci_radial(geometry, r)
    rho = np.minimum(rho_rad, rho_tan)
    return np.maximum((geometry.n - 1) * K - rho, 0.0)


def simpson(y, h: float) -> float:
    """Composite Simpson rule on an odd number of equispaced samples."""
    if len(y) < 3 or len(y) % 2 == 0:
        raise CurvatureError("Simpson's rule needs an odd number (>= 3) of samples")
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2])))


@dataclass
class CurvatureReport:
    p: float
    R: float
    K: float
    k: float
    volume: float
    integral: float
    error_estimate: float
    nodes: int
    center: str = CENTER_NOTE

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _k_parts(geometry, p, R, K, intervals):
    r = np.linspace(0.0, R, intervals + 1)
    h = R / intervals
    weight = geometry.f(r) ** (geometry.n - 1)
    ric = ricci_minus(geometry, r, K)
    vol = simpson(weight, h)
    integral = simpson(ric**p * weight, h)
    return vol, integral


def k_quantity(geometry: WarpedGeometry, p: float, R: float, K: float = 0.0,
               intervals: int = 2048) -> CurvatureReport:
    """Integral curvature quantity on the geodesic ball B(pole, R).

    The unit-sphere area cancels in the average, so only f^(n-1) is
    integrated.  The error estimate is the Richardson difference against
    the half-resolution rule.
    """
    n = geometry.n
    if n < 2:
        raise CurvatureError("k is defined for n >= 2")
    if not p > n / 2:
        raise CurvatureError(f"need p > n/2 = {n / 2}")
    if K < 0:
        raise CurvatureError("K must be non-negative")
    if not 0 < R <= geometry.r_max * (1 + 1e-12):
        raise CurvatureError("R must lie in (0, r_max]")
    if intervals < 4 or intervals % 4:
        raise CurvatureError("intervals must be a positive multiple of 4")
    R = min(R, geometry.r_max)
    vol, integral = _k_parts(geometry, p, R, K, intervals)
    vol2, integral2 = _k_parts(geometry, p, R, K, intervals // 2)
    k = R**2 * (integral / vol) ** (1.0 / p)
    k2 = R**2 * (integral2 / vol2) ** (1.0 / p)
    return CurvatureReport(p, R, K, float(k), vol, integral, abs(k - k2) / 15.0, intervals + 1)


def perturbed_warp(amplitude: float, base: str = "sinh") -> str:
    """Warp expression for the bump family f = b(r) (1 + A r^2 e^(-r))."""
    if base == "sinh":
        return f"sinh(r)*(1 + {amplitude!r}*r**2*exp(-r))"
    if base == "euclidean":
        return f"r*(1 + {amplitude!r}*r**2*exp(-r**2))"
    raise CurvatureError(f"unknown base {base!r}")


# -- J-flow ---------------------------------------------------------------------

@dataclass
class JFlowState:
    r: np.ndarray
    times: np.ndarray
    J: np.ndarray                 # shape (slices, M + 1)
    delta: float
    convention: str
    R: float
    K: float
    dt_initial: float
    halvings: int = 0
    ric_minus: np.ndarray = field(default=None, repr=False)

    @property
    def min_J(self) -> np.ndarray:
        return self.J.min(axis=1)

    @property
    def max_J(self) -> np.ndarray:
        return self.J.max(axis=1)

    def slices(self):
        """(t, min J, max J) rows."""
        return [(float(t), float(lo), float(hi)) for t, lo, hi in zip(self.times, self.min_J, self.max_J)]


def _advection_split(c, h):
    """Centered weights, switching to upwind where the cell Peclet number exceeds 1."""
    lower = 1.0 / h**2 - c / (2 * h)
    upper = 1.0 / h**2 + c / (2 * h)
    steep = np.abs(c) * h / 2 > 1
    up = c > 0
    lower = np.where(steep & up, 1.0 / h**2, np.where(steep, 1.0 / h**2 - c / h, lower))
    upper = np.where(steep & up, 1.0 / h**2 + c / h, np.where(steep, 1.0 / h**2, upper))
    return lower, upper


def solve_j_equation(geometry: WarpedGeometry, delta: float, R: float, T: float,
                     convention: str = "multiplicative", K: float = 0.0,
                     M: int = 256, dt: float | None = None, min_dt: float | None = None) -> JFlowState:
    """Implicit Euler for the radial J-flow on B(R) x (0, T].

    With alpha = 5/delta the substitution z = J^(1 - alpha) removes the
    gradient nonlinearity exactly:

        z_t = Delta z + 2 (alpha - 1) Ric^- z / J^e,

    e = 0 for the multiplicative convention (a linear problem) and e = 1
    for the as-written source, where J is lagged from the previous step.
    Each step is one tridiagonal M-matrix solve, so z >= 1 is
    non-decreasing and 0 < J <= 1 is non-increasing.  z is carried as
    exp(L) y with max y = 1 to stay in floating-point range.  Steps that
    break the M-matrix property or overflow are halved; below ``min_dt``
    the run fails.
    """
    if not 0 < delta < 0.2:
        raise JFlowError("delta must lie in (0, 1/5)")
    if convention not in CONVENTIONS:
        raise JFlowError(f"convention must be one of {CONVENTIONS}")
    if not T > 0:
        raise JFlowError("T must be positive")
    if not 0 < R <= geometry.r_max * (1 + 1e-12):
        raise JFlowError("R must lie in (0, r_max]")
    n = geometry.n
    if n < 2:
        raise JFlowError("the J-flow needs n >= 2")
    h = R / M
    r = np.arange(M + 1) * h
    dt = T / 200.0 if dt is None else dt
    min_dt = dt * 2.0**-20 if min_dt is None else min_dt
    dt0 = dt
    alpha = 5.0 / delta
    ric = ricci_minus(geometry, r, K)
    c = np.zeros(M + 1)
    c[1:M] = (n - 1) * geometry.log_derivative(r[1:M])
    if geometry.has_drift:
        c[1:M] += geometry.v(r[1:M])
    lower, upper = _advection_split(c[1:M], h)

    def to_J(y, L):
        logz = np.maximum(L + np.log(np.maximum(y, np.finfo(float).tiny)), 0.0)
        return np.exp(-logz / (alpha - 1.0))

    y = np.ones(M + 1)
    L = 0.0
    J = np.ones(M + 1)
    times, slices = [0.0], [J.copy()]
    t = 0.0
    halvings = 0
    while t < T * (1 - 1e-12):
        step = min(dt, T - t)
        growth = 2.0 * (alpha - 1.0) * ric
        if convention == "as-written":
            growth = growth / J
        diag = np.ones(M + 1)
        diag[1:M] += step * (lower + upper)
        diag[0] += step * 2 * n / h**2
        diag[:M] -= step * growth[:M]
        ok = bool(np.all(np.isfinite(diag)) and np.all(diag[:M] > 0))
        if ok:
            ab = np.zeros((3, M + 1))
            ab[1] = diag
            ab[0, 2:M + 1] = -step * upper
            ab[2, 0:M - 1] = -step * lower
            ab[0, 1] = -step * 2 * n / h**2
            # solve for the increment so that steady states stay exact
            dy = np.diff(y)
            Ly = np.zeros(M + 1)
            Ly[1:M] = upper * dy[1:] - lower * dy[:-1]
            Ly[0] = 2 * n / h**2 * dy[0]
            rhs = step * (Ly + growth * y)
            rhs[M] = math.exp(-L) - y[M]    # z = 1 on the boundary sphere
            new = y + scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
            ok = bool(np.all(np.isfinite(new)) and np.min(new[:M]) > 0)
        if ok:
            scale = float(np.max(new))
            new_L = L + math.log(scale)
            new_J = to_J(new / scale, new_L)
            new_J[M] = 1.0
            ok = bool(np.min(new_J) > 0 and np.all(new_J <= J + 1e-15))
        if not ok:
            dt = step / 2
            halvings += 1
            if dt < min_dt:
                raise JFlowError(f"positivity lost at t = {t:.6g} below the minimum step")
            continue
        y, L, J = new / scale, new_L, new_J
        t += step
        times.append(t)
        slices.append(J.copy())
    return JFlowState(r, np.array(times), np.array(slices), delta, convention, R, K, dt0,
                      halvings, ric)


def j_envelope_feasible(state: JFlowState, k: float, p: float, n: float, c: float) -> bool:
    env = constants.j_decay(state.delta, k, p, n, state.R, state.times, c)
    return bool(np.all(state.min_J >= env))


def fit_j_decay(state: JFlowState, k: float, p: float, n: float,
                lo: float = 1e-12, hi: float = 1e12) -> float | None:
    """Smallest C (to bisection accuracy, rounded up) with min J >= J_R(t) on the record.

    The envelope decreases in C, so feasibility is monotone.  Returns None
    when no C in [lo, hi] works.
    """
    if not j_envelope_feasible(state, k, p, n, hi):
        return None
    if k == 0:
        return lo
    if j_envelope_feasible(state, k, p, n, lo):
        return lo
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if j_envelope_feasible(state, k, p, n, math.exp(mid)):
            b = mid
        else:
            a = mid
        if b - a < 1e-12:
            break
    return math.exp(b)


# -- integral-curvature check on sweeps ------------------------------------------

def check_integral_curvature_bound(results, p: float, k_threshold: float, K: float = 0.0):
    """Filter sweep results by k(p, R) <= k_threshold and fit sup |grad ln u|^2 <= C / R^2.

    Returns (reports, excluded) where excluded lists (key, k) pairs.
    """
    from .verify import VerifyError, _scaling_fit

    kept, excluded = [], []
    for res in results:
        if not res.converged:
            excluded.append((res.key, math.nan))
            continue
        try:
            kq = k_quantity(res.geometry, p, res.R, K).k
        except (CurvatureError, GeometryError) as exc:
            raise VerifyError(f"k unavailable for {res.key}: {exc}") from exc
        (kept if kq <= k_threshold else excluded).append(res if kq <= k_threshold else (res.key, kq))
    if len(kept) < 2:
        raise VerifyError("filtered sweep has fewer than two members")
    reports = _scaling_fit(kept, "sup_grad_log_sq", lambda r: r.stats.sup_grad_log_sq,
                           lambda r: 1.0 / r.R**2, "C / R^2")
    return reports, excluded
