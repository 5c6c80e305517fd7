"""Rotationally symmetric model manifolds.

A model is the warped product ``dr^2 + f(r)^2 g_{S^{n-1}}`` on a geodesic
ball about the pole, optionally carrying a radial drift field
``V = v(r) d/dr`` and a Bakry-Emery dimension ``m > n``.  For ``n == 1``
the model degenerates to the symmetric interval ``[-r_max, r_max]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expressions import (
    RadialFunction,
    laurent_eval,
    radial_function,
    series_div,
    series_mul,
)

# below this fraction of r_max, warp quotients come from the Taylor expansion
POLE_SERIES_FRACTION = 1e-3

WARP_KINDS = ("euclidean", "spherical", "hyperbolic", "custom")


_DEFAULT_KAPPA = {"spherical": 1.0, "hyperbolic": -1.0}


class GeometryError(ValueError):
    pass


def _space_form_expr(kind: str, kappa: float) -> str:
    if kind == "euclidean":
        return "r"
    c = math.sqrt(abs(kappa))
    fn = "sin" if kind == "spherical" else "sinh"
    if c == 1.0:
        return f"{fn}(r)"
    return f"{fn}({c!r}*r)/{c!r}"


@dataclass(frozen=True)
class WarpedGeometry:
    n: int
    warp_kind: str
    r_max: float
    kappa: float = 0.0
    warp_expr: str | None = None
    closed: bool = False
    drift_expr: str | None = None
    m: float | None = None
    _warp: RadialFunction | None = field(init=False, repr=False, compare=False, default=None)
    _drift: RadialFunction | None = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GeometryError(f"dimension must be an integer >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.warp_kind not in WARP_KINDS:
            raise GeometryError(f"unknown warp kind {self.warp_kind!r}")
        if self.r_max is None or not (self.r_max > 0 and math.isfinite(self.r_max)):
            raise GeometryError("r_max must be a positive finite number")
        kind, kappa = self.warp_kind, float(self.kappa)
        if kind == "spherical":
            if kappa <= 0:
                raise GeometryError("spherical warp needs kappa > 0")
            diameter = math.pi / math.sqrt(kappa)
            if self.closed:
                if abs(self.r_max - diameter) > 1e-12 * diameter:
                    raise GeometryError("closed sphere requires r_max = pi/sqrt(kappa)")
                object.__setattr__(self, "r_max", diameter)
            elif self.r_max >= diameter:
                raise GeometryError("spherical ball must stay inside r < pi/sqrt(kappa)")
        elif self.closed:
            raise GeometryError("only the spherical warp can be closed")
        if kind == "hyperbolic" and kappa >= 0:
            raise GeometryError("hyperbolic warp needs kappa < 0")
        if kind == "euclidean":
            object.__setattr__(self, "kappa", 0.0)
        if kind == "custom":
            if not self.warp_expr:
                raise GeometryError("custom warp needs an expression")
            expr = self.warp_expr
        else:
            expr = _space_form_expr(kind, kappa)
        object.__setattr__(self, "warp_expr", expr)
        if self.n >= 2:
            warp = radial_function(expr)
            object.__setattr__(self, "_warp", warp)
            if kind == "custom":
                c = warp.taylor()
                if abs(c[0]) > 1e-12 or abs(c[1] - 1.0) > 1e-12:
                    raise GeometryError(f"custom warp must satisfy f(0)=0, f'(0)=1; got {c[0]:g}, {c[1]:g}")
                rr = np.linspace(0, self.r_max, 2049)[1:-1]
                if np.any(warp.value(rr) <= 0):
                    raise GeometryError("custom warp must be positive on (0, r_max)")
        if self.drift_expr is not None:
            if self.m is None or not self.m > self.n:
                raise GeometryError("a drift field needs a Bakry-Emery parameter m > n")
            object.__setattr__(self, "_drift", radial_function(self.drift_expr))

    # -- constructors -------------------------------------------------------

    @classmethod
    def euclidean(cls, n: int, r_max: float, **kw) -> "WarpedGeometry":
        return cls(n=n, warp_kind="euclidean", r_max=r_max, **kw)

    @classmethod
    def hyperbolic(cls, n: int, r_max: float, kappa: float = -1.0, **kw) -> "WarpedGeometry":
        return cls(n=n, warp_kind="hyperbolic", r_max=r_max, kappa=kappa, **kw)

    @classmethod
    def spherical(cls, n: int, kappa: float = 1.0, r_max: float | None = None,
                  closed: bool = False, **kw) -> "WarpedGeometry":
        if closed and r_max is None:
            r_max = math.pi / math.sqrt(kappa)
        return cls(n=n, warp_kind="spherical", r_max=r_max, kappa=kappa, closed=closed, **kw)

    @classmethod
    def custom(cls, n: int, expr: str, r_max: float, **kw) -> "WarpedGeometry":
        return cls(n=n, warp_kind="custom", r_max=r_max, warp_expr=expr, **kw)

    @classmethod
    def from_config(cls, cfg: dict) -> "WarpedGeometry":
        warp = cfg.get("warp", {"kind": "euclidean"})
        kind = warp.get("kind", "euclidean")
        drift = cfg.get("drift")
        kw = dict(
            n=cfg["dim"],
            warp_kind=kind,
            r_max=cfg.get("r_max"),
            kappa=warp.get("kappa", _DEFAULT_KAPPA.get(kind, 0.0)),
            warp_expr=warp.get("expr"),
            closed=bool(cfg.get("closed", False)),
        )
        if kind == "spherical" and kw["closed"] and kw["r_max"] is None:
            kw["r_max"] = math.pi / math.sqrt(kw["kappa"])
        if drift is not None:
            kw["drift_expr"] = drift["expr"]
            kw["m"] = drift["m"]
        return cls(**kw)

    def to_config(self) -> dict:
        warp = {"kind": self.warp_kind}
        if self.warp_kind in ("spherical", "hyperbolic"):
            warp["kappa"] = self.kappa
        if self.warp_kind == "custom":
            warp["expr"] = self.warp_expr
        cfg = {"dim": self.n, "warp": warp, "r_max": self.r_max, "closed": self.closed}
        if self.drift_expr is not None:
            cfg["drift"] = {"expr": self.drift_expr, "m": self.m}
        return cfg

    def with_r_max(self, r_max: float) -> "WarpedGeometry":
        cfg = self.to_config()
        cfg["r_max"] = r_max
        return WarpedGeometry.from_config(cfg)

    # -- warp and drift ------------------------------------------------------

    @property
    def has_drift(self) -> bool:
        return self._drift is not None

    @property
    def pole_cutoff(self) -> float:
        return POLE_SERIES_FRACTION * self.r_max

    def _require_warp(self):
        if self.n < 2:
            raise GeometryError("the interval model (n = 1) has no warp function")

    def _check_domain(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise GeometryError(f"radius outside [0, {self.r_max}]")
        return r

    def f(self, r):
        self._require_warp()
        return self._warp.value(self._check_domain(r))

    def df(self, r):
        self._require_warp()
        return self._warp.d1(self._check_domain(r))

    def ddf(self, r):
        self._require_warp()
        return self._warp.d2(self._check_domain(r))

    def _series(self):
        a = np.asarray(self._warp.taylor())
        g = a[1:]
        d1 = np.array([(k + 1) * a[k + 1] for k in range(len(a) - 1)])
        d2 = np.array([(k + 2) * (k + 1) * a[k + 2] for k in range(len(a) - 2)])
        numer = -series_mul(d1, d1)
        numer[0] += 1.0
        return {
            "log_derivative": (series_div(d1, g), 1),
            "curvature": (series_div(d2, g), 1),
            "tangential": (series_div(numer, series_mul(g, g)), 2),
        }

    def _quotient(self, name: str, r, direct):
        self._require_warp()
        r = self._check_domain(r)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        near = r < self.pole_cutoff
        if self.closed:
            near &= r < 0.5 * self.r_max
        far = ~near
        if np.any(far):
            out[far] = direct(r[far])
        if np.any(near):
            c, shift = self._series()[name]
            out[near] = laurent_eval(c, shift, r[near])
        return float(out[0]) if scalar else out

    def log_derivative(self, r):
        """f'/f, singular like 1/r at the pole."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._quotient("log_derivative",
                                  r, lambda x: self._warp.d1(x) / self._warp.value(x))

    def r_log_derivative(self, r):
        """r f'/f, regular (equal to 1) at the pole."""
        self._require_warp()
        r = np.atleast_1d(self._check_domain(r))
        out = np.empty_like(r)
        near = r < self.pole_cutoff
        if np.any(~near):
            out[~near] = r[~near] * self._warp.d1(r[~near]) / self._warp.value(r[~near])
        if np.any(near):
            c, _ = self._series()["log_derivative"]
            out[near] = laurent_eval(c, 0, r[near])
        return out

    def curvature_quotient(self, r):
        """f''/f (minus the radial sectional curvature)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._quotient("curvature", r, lambda x: self._warp.d2(x) / self._warp.value(x))

    def tangential_quotient(self, r):
        """(1 - f'^2)/f^2 (the sectional curvature of tangential 2-planes)."""
        def direct(x):
            fv, dv = self._warp.value(x), self._warp.d1(x)
            return (1.0 - dv) * (1.0 + dv) / fv**2
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._quotient("tangential", r, direct)

    def v(self, r):
        r = np.asarray(r, dtype=float)
        if self._drift is None:
            return np.zeros_like(r) if r.ndim else 0.0
        return self._drift.value(r)

    def dv(self, r):
        r = np.asarray(r, dtype=float)
        if self._drift is None:
            return np.zeros_like(r) if r.ndim else 0.0
        return self._drift.d1(r)

    def drift_over_r(self, r):
        """v(r)/r with the pole limit v'(0) (needs v(0) = 0)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        near = r < self.pole_cutoff
        if np.any(~near):
            out[~near] = self.v(r[~near]) / r[~near]
        if np.any(near):
            c = np.asarray(self._drift.taylor()) if self._drift is not None else np.zeros(4)
            out[near] = laurent_eval(c, 1, r[near])
        return out

    def volume_element(self, r):
        return volume_element(self, r)


def warp_eval(geometry: WarpedGeometry, r):
    """Return (f, f', f'') at radius r."""
    return geometry.f(r), geometry.df(r), geometry.ddf(r)


def ricci_radial(geometry: WarpedGeometry, r):
    """Eigenvalues (radial, tangential) of the Ricci tensor at radius r.

    ``rho_rad = -(n-1) f''/f`` and ``rho_tan = -f''/f + (n-2)(1 - f'^2)/f^2``;
    at the pole both reduce to the series limit.
    """
    n = geometry.n
    if n < 2:
        raise GeometryError("Ricci curvature is not defined for the interval model")
    q = geometry.curvature_quotient(r)
    rho_rad = -(n - 1) * q
    if n == 2:
        return rho_rad, -q
    return rho_rad, -q + (n - 2) * geometry.tangential_quotient(r)


def bakry_emery_radial(geometry: WarpedGeometry, r):
    """Eigenvalues of Ric - L_V g / 2 - V(x)V / (m - n) for radial V = v d/dr."""
    rho_rad, rho_tan = ricci_radial(geometry, r)
    if not geometry.has_drift:
        return rho_rad, rho_tan
    r_arr = np.asarray(r, dtype=float)
    v, dv = geometry.v(r_arr), geometry.dv(r_arr)
    radial = rho_rad - dv - v**2 / (geometry.m - geometry.n)
    # v f'/f = (v/r) * (r f'/f), both factors regular at the pole
    r_lf = geometry.r_log_derivative(r_arr).reshape(np.shape(r_arr))
    tangential = rho_tan - geometry.drift_over_r(r_arr).reshape(np.shape(r_arr)) * r_lf
    if np.ndim(r) == 0:
        return float(radial), float(tangential)
    return radial, tangential


def lie_derivative_fd(geometry: WarpedGeometry, r, step: float = 1e-4):
    """Half the Lie derivative of g along V, by centered differences in flow time.

    The flow of V moves r to r + t v(r) to first order, so the pulled back
    metric has radial component (1 + t v')^2 and tangential f(r + t v)^2.
    Returned as eigenvalues (radial, tangential) relative to g.
    """
    r = np.asarray(r, dtype=float)
    v, dv = geometry.v(r), geometry.dv(r)

    def metric(t):
        return (1.0 + t * dv) ** 2, geometry.f(r + t * v) ** 2

    rp, tp = metric(step)
    rm, tm = metric(-step)
    f2 = geometry.f(r) ** 2
    return 0.5 * (rp - rm) / (2 * step), 0.5 * (tp - tm) / (2 * step) / f2


_BOUND_GRID_POINTS = 4097


def ricci_lower_bound(geometry: WarpedGeometry, ball_radius: float) -> float:
    """Smallest K >= 0 with Ric >= -K g (Ric_V^m with a drift) on B(ball_radius)."""
    if ball_radius > geometry.r_max * (1 + 1e-12) or ball_radius < 0:
        raise GeometryError("ball radius exceeds the model domain")
    if geometry.n < 2:
        return 0.0
    # fixed global grid keeps the bound monotone in the radius
    grid = np.linspace(0.0, geometry.r_max, _BOUND_GRID_POINTS)
    pts = np.append(grid[grid <= ball_radius], min(ball_radius, geometry.r_max))
    if geometry.closed:
        pts = pts[pts < geometry.r_max]
    lo_rad, lo_tan = bakry_emery_radial(geometry, pts)
    lowest = float(np.min(np.minimum(lo_rad, lo_tan)))
    return max(0.0, -lowest)


def volume_element(geometry: WarpedGeometry, r):
    """Area of the geodesic sphere of radius r: omega_{n-1} f(r)^{n-1}."""
    n = geometry.n
    if n < 2:
        raise GeometryError("volume element is defined for n >= 2")
    omega = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return omega * geometry.f(r) ** (n - 1)


# -- cut-off functions -------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


def _smoothstep_d1(x):
    x = np.clip(x, 0.0, 1.0)
    return 30 * x**2 * (1 - x) ** 2


def _smoothstep_d2(x):
    x = np.clip(x, 0.0, 1.0)
    return 60 * x * (1 - x) * (1 - 2 * x)


def cutoff_radial(r, R: float):
    """phi, phi', phi'' of the fixed ramp: 1 on [0, R], 0 beyond 3R/2."""
    r = np.asarray(r, dtype=float)
    x = (r - R) / (0.5 * R)
    phi = 1.0 - _smoothstep(x)
    d1 = -_smoothstep_d1(x) * 2.0 / R
    d2 = -_smoothstep_d2(x) * 4.0 / R**2
    return phi, d1, d2


@dataclass
class CutoffProfile:
    R: float
    l: float
    r: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    lap: np.ndarray
    grad_constant: float
    lap_constant: float
    K: float
    lap_comparison_constant: float
    drift: bool = False


def _laplacian_of_radial(geometry, r, d1, d2):
    lap = d2.copy()
    pos = r > 0
    if geometry.n >= 2:
        lap[pos] += (geometry.n - 1) * geometry.log_derivative(r[pos]) * d1[pos]
        lap[~pos] *= geometry.n
    if geometry.has_drift:
        lap += geometry.v(r) * d1
    return lap


def cutoff(geometry: WarpedGeometry, R: float, l: float = 0.5, samples: int = 20001) -> CutoffProfile:
    """Build Phi = phi(d(x0, .)) and measure its gradient and Laplacian constants.

    ``grad_constant`` is sup |grad Phi| / Phi^l * R, which is finite only for
    l <= 2/3 with the quintic ramp (reported as inf otherwise).
    ``lap_constant`` is inf Delta Phi * R^2 (Delta_V with a drift), and
    ``lap_comparison_constant`` the smallest C with
    inf Delta Phi >= -C sqrt(K)/R - C/R^2 on the ball.
    """
    if not 0.0 < l < 1.0:
        raise GeometryError("cut-off exponent l must lie in (0, 1)")
    if R <= 0 or 2 * R > geometry.r_max * (1 + 1e-12):
        raise GeometryError("cut-off needs 2R <= r_max")
    x = np.linspace(0.0, 1.0, samples)
    ramp = R * (1.0 + 0.5 * x)
    r = np.unique(np.concatenate([np.linspace(0.0, 2 * R, 2001), ramp]))
    phi, d1, d2 = cutoff_radial(r, R)
    lap = _laplacian_of_radial(geometry, r, d1, d2)

    phi_ramp, d1_ramp, _ = cutoff_radial(ramp, R)
    if l > 2.0 / 3.0:
        grad_constant = math.inf
    else:
        live = phi_ramp > 0
        grad_constant = float(np.max(np.abs(d1_ramp[live]) / phi_ramp[live] ** l) * R)
    lap_min = float(np.min(lap))
    K = ricci_lower_bound(geometry, 2 * R) if geometry.n >= 2 else 0.0
    scale = math.sqrt(K) / R + 1.0 / R**2
    return CutoffProfile(
        R=R, l=l, r=r, phi=phi, grad=np.abs(d1), lap=lap,
        grad_constant=grad_constant,
        lap_constant=lap_min * R**2,
        K=K,
        lap_comparison_constant=max(0.0, -lap_min) / scale,
        drift=geometry.has_drift,
    )
