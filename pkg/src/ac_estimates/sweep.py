"""Parameter sweeps: each member is a ball B(2R) solve measured on B(R)."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equations import EquationSpec
from .geometry import WarpedGeometry
from .solver import (
    BallStats,
    NewtonConfig,
    RadialGrid,
    SolverError,
    ball_stats,
    newton_solve_radial,
    solve_polar,
)
from .verify import member_curvature

WORKERS_ENV = "AC_ESTIMATES_WORKERS"
FAMILY_KINDS = ("constant", "fourier", "exp-sin")


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryFamily:
    """Dirichlet data on the outer sphere.

    ``constant`` gives radial problems; ``fourier`` (mean times
    1 + seeded low-mode cosines/sines) and ``exp-sin`` (exp(sin theta))
    need a 2D geometry and go through the polar solver.
    """

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.3
    modes: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise SweepError(f"unknown boundary family {self.kind!r}; choose from {FAMILY_KINDS}")
        if not self.value > 0:
            raise SweepError("boundary family value must be positive")
        if self.kind == "fourier" and not 0 <= self.amplitude < 1:
            raise SweepError("fourier amplitude must lie in [0, 1) to keep data positive")

    @property
    def radial(self) -> bool:
        return self.kind == "constant"

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.value:g}"
        if self.kind == "fourier":
            return f"fourier:{self.value:g}:{self.amplitude:g}:{self.modes}:seed{self.seed}"
        return "exp-sin"

    def profile(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            return np.full_like(theta, self.value)
        if self.kind == "exp-sin":
            return np.exp(np.sin(theta))
        rng = np.random.default_rng(self.seed)
        a = rng.uniform(-1, 1, size=self.modes)
        b = rng.uniform(-1, 1, size=self.modes)
        norm = np.sum(np.abs(a) + np.abs(b))
        wave = sum(a[k] * np.cos((k + 1) * theta) + b[k] * np.sin((k + 1) * theta)
                   for k in range(self.modes))
        return self.value * (1 + self.amplitude * wave / norm)

    def to_config(self) -> dict:
        return {"kind": self.kind, "value": self.value, "amplitude": self.amplitude,
                "modes": self.modes, "seed": self.seed}

    @classmethod
    def from_config(cls, cfg) -> "BoundaryFamily":
        if isinstance(cfg, (int, float)):
            return cls("constant", float(cfg))
        return cls(**cfg)


@dataclass(frozen=True)
class SweepMember:
    geometry: dict          # geometry config without r_max
    equation: dict
    R: float
    family: BoundaryFamily
    label: str = ""

    @property
    def key(self) -> dict:
        geo = self.label or _geometry_label(self.geometry)
        return {"geometry": geo, "equation": _equation_label(self.equation),
                "R": float(self.R), "family": self.family.label}

    def build_geometry(self) -> WarpedGeometry:
        cfg = dict(self.geometry)
        cfg["r_max"] = 2.0 * self.R
        return WarpedGeometry.from_config(cfg)


def _geometry_label(cfg: dict) -> str:
    warp = cfg.get("warp", {"kind": "euclidean"})
    label = f"{warp.get('kind', 'euclidean')}-n{cfg['dim']}"
    if "kappa" in warp:
        label += f"-k{warp['kappa']:g}"
    if warp.get("expr"):
        label += f"-[{warp['expr']}]"
    if cfg.get("drift"):
        label += f"-v[{cfg['drift']['expr']}]-m{cfg['drift']['m']:g}"
    return label


def _equation_label(cfg: dict) -> str:
    if "preset" in cfg:
        extra = ",".join(f"{k}={cfg[k]:g}" for k in sorted(cfg) if k != "preset")
        return cfg["preset"] + (f"({extra})" if extra else "")
    return "a={a:g},b={b:g},s={s:g},t={t:g}".format(**cfg)


@dataclass
class SweepResult:
    member: SweepMember
    geometry: WarpedGeometry
    spec: EquationSpec
    K: float
    stats: BallStats | None
    summary: dict
    converged: bool
    error: str = ""
    solution: object = field(default=None, repr=False)

    @property
    def key(self) -> dict:
        return self.member.key

    @property
    def R(self) -> float:
        return self.member.R

    def to_dict(self) -> dict:
        out = {"key": self.key, "K": self.K, "converged": self.converged, "error": self.error,
               "solve": self.summary}
        if self.stats is not None:
            out.update(sup_u=self.stats.sup_u, inf_u=self.stats.inf_u,
                       sup_grad_log_sq=self.stats.sup_grad_log_sq, log_ratio=self.stats.log_ratio)
        return out


def run_member(member: SweepMember, solver: NewtonConfig | None = None,
               nodes_per_unit: int = 512, polar_shape: tuple[int, int] = (256, 128),
               keep_solution: bool = False) -> SweepResult:
    """Solve on B(2R) and measure on B(R)."""
    geometry = member.build_geometry()
    spec = EquationSpec.from_config(member.equation)
    K = member_curvature(geometry, member.R)
    try:
        if member.family.radial:
            grid = RadialGrid.default(geometry, geometry.r_max, nodes_per_unit)
            sol = newton_solve_radial(geometry, spec, grid, member.family.value, solver)
        else:
            if geometry.n != 2:
                raise SweepError("non-radial boundary families need a 2D geometry")
            sol = solve_polar(geometry, spec, member.family.profile, solver,
                              M=polar_shape[0], J=polar_shape[1])
    except SolverError as exc:
        return SweepResult(member, geometry, spec, K, None, {}, False, f"solver error: {exc}")
    stats = ball_stats(sol, member.R) if sol.converged else None
    return SweepResult(member, geometry, spec, K, stats, sol.summary(), bool(sol.converged),
                       "" if sol.converged else sol.message, sol if keep_solution else None)


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError as exc:
                raise SweepError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise SweepError("worker count must be at least 1")
    return workers


def _run_one(args):
    member, solver, nodes, polar = args
    return run_member(member, solver, nodes, polar)


def run_sweep(members, workers: int | None = None, solver: NewtonConfig | None = None,
              nodes_per_unit: int = 512, polar_shape: tuple[int, int] = (256, 128)) -> list:
    """Run every member (in parallel when workers > 1); results follow input order."""
    members = list(members)
    if not members:
        raise SweepError("empty sweep")
    workers = min(resolve_workers(workers), len(members))
    jobs = [(m, solver, nodes_per_unit, polar_shape) for m in members]
    if workers == 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def usable(results):
    """Converged results, and (key, reason) pairs for the rest."""
    good = [r for r in results if r.converged]
    dropped = [(r.key, r.error or "not converged") for r in results if not r.converged]
    return good, dropped


def default_sweep(radii=(1.0, 2.0, 4.0, 8.0), boundaries=(0.5, 2.0)) -> list:
    """Sixteen Allen-Cahn members: Euclidean and hyperbolic planes x R x boundary value."""
    geometries = [{"dim": 2, "warp": {"kind": "euclidean"}},
                  {"dim": 2, "warp": {"kind": "hyperbolic", "kappa": -1.0}}]
    return [SweepMember(g, {"preset": "allen_cahn"}, float(R), BoundaryFamily("constant", float(b)))
            for g in geometries for b in boundaries for R in radii]


def members_from_config(cfg: dict) -> list:
    """Cartesian product of geometries x equations x R x boundary families."""
    try:
        geometries = cfg["geometries"]
        equations = cfg.get("equations", [{"preset": "allen_cahn"}])
        radii = cfg["radii"]
        families = [BoundaryFamily.from_config(f) for f in cfg["boundaries"]]
    except KeyError as exc:
        raise SweepError(f"sweep config missing field {exc.args[0]!r}") from exc
    for R in radii:
        if not (isinstance(R, (int, float)) and R > 0 and math.isfinite(R)):
            raise SweepError(f"sweep radii must be positive numbers, got {R!r}")
    return [SweepMember(g, e, float(R), f) for g in geometries for e in equations
            for f in families for R in radii]
