"""Command-line front end.

    ac-estimates constants --n 2 --K 2
    ac-estimates verify --check closed --preset allen_cahn --kappa 1
    ac-estimates sweep --config sweep.json --out results/ --check harnack

Exit status: 0 when every selected check passes (or none was selected),
2 when a check fails, 1 on configuration or solver errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    CHECKS,
    FORMATS,
    PARAM_DEFAULTS,
    SUBCOMMANDS,
    ConfigError,
    RunConfig,
    build_run_config,
    read_json,
)
from .constants import (
    A_detail,
    ConstantsError,
    N_with_attainment,
    beta_interval,
    j_decay,
    local_gradient_bound,
)
from .equations import EquationError, EquationSpec, select_beta
from .expressions import ExpressionError
from .geometry import GeometryError
from .integral_curvature import CurvatureError, JFlowError, fit_j_decay, k_quantity, solve_j_equation
from .plotting import plot_kind, plot_profile
from .report import ReportError, dumps, emit_plot_data, plot_rows, write_json, write_table
from .shooting import LIOUVILLE_CASES, ShootingError
from .solver import SolverError, ball_stats, solve_ball, solve_closed_sphere, solve_polar
from .sweep import BoundaryFamily, SweepError, default_sweep, members_from_config, run_sweep, usable
from .verify import (
    VerifyError,
    all_passed,
    beta_inequality_oracle,
    check_closed_liouville,
    check_gradient_bound,
    check_harnack,
    check_identity,
    check_identity_drift,
    check_liouville,
    random_closed_profile,
)

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2
IDENTITY_NODES_PER_UNIT = 64

ERRORS = (ConfigError, SolverError, GeometryError, EquationError, ExpressionError, ConstantsError,
          CurvatureError, JFlowError, SweepError, VerifyError, ShootingError, ReportError, OSError)


@dataclass
class Outcome:
    payload: dict
    tables: list = field(default_factory=list)      # (name, rows, columns)
    plots: list = field(default_factory=list)       # plot kinds
    checks: dict = field(default_factory=dict)      # check name -> passed
    profile: tuple | None = None                    # (r, u) for a profile figure


# -- subcommands ------------------------------------------------------------------

def run_constants(cfg: RunConfig) -> Outcome:
    p = cfg.params
    n, K = p["n"], p["K"]
    N, n_attained = N_with_attainment(n)
    detail = A_detail(n, K)
    _, upper, included = beta_interval(n)
    result = {"n": n, "K": K, "N": N, "N_attained": n_attained, "A": detail.value,
              "A_beta": detail.beta, "A_attained": detail.attained,
              "beta_upper": upper, "beta_upper_included": included}
    payload = {"constants": result}
    if p["R"] is not None:
        payload["bound"] = local_gradient_bound(n, K, p["R"], p["beta"], p["eps"]).to_dict()
    return Outcome(payload, [("constants", [result], list(result))])


def run_solve(cfg: RunConfig) -> Outcome:
    p = cfg.params
    spec = cfg.build_equation()
    if cfg.geometry.get("closed"):
        geo = cfg.build_geometry()
        amplitude, coeffs, profile = random_closed_profile(np.random.default_rng(cfg.seed), geo.kappa)
        sol = solve_closed_sphere(geo.kappa, spec, profile, cfg.newton, n=geo.n)
        summary = dict(sol.summary(), initial_amplitude=amplitude, initial_coefficients=coeffs)
        rows = [{"r": r, "u": u} for r, u in zip(sol.r, sol.u)]
        out = Outcome({"solution": summary}, [("profile", rows, ["r", "u"])], profile=(sol.r, sol.u))
    else:
        R = p["R"]
        geo = cfg.build_geometry(r_max=R)
        family = BoundaryFamily.from_config(p["family"] if p["family"] is not None else p["boundary"])
        if family.radial:
            sol = solve_ball(geo, spec, R, family.value, cfg.newton, cfg.nodes_per_unit)
            rows = [{"r": r, "u": u} for r, u in zip(sol.r, sol.u)]
            out = Outcome({}, [("profile", rows, ["r", "u"])], profile=(sol.r, sol.u))
        else:
            M, J = cfg.polar_shape
            sol = solve_polar(geo, spec, family.profile, cfg.newton, M=M, J=J)
            rows = [{"r": r, "theta": th, "u": sol.values[i, j]}
                    for i, r in enumerate(sol.r) for j, th in enumerate(sol.theta)]
            out = Outcome({}, [("field", rows, ["r", "theta", "u"])], profile=(sol.r, sol.values[:, 0]))
        out.payload["solution"] = sol.summary()
        out.payload["boundary_family"] = family.to_config()
        if sol.converged:
            st = ball_stats(sol, R / 2)
            out.payload["half_ball"] = {"sup_u": st.sup_u, "inf_u": st.inf_u,
                                        "sup_grad_log_sq": st.sup_grad_log_sq, "log_ratio": st.log_ratio}
    if not sol.converged:
        raise SolverError(f"solve did not converge: {sol.message}")
    return out


def _identity(cfg: RunConfig, out: Outcome):
    p = cfg.params
    R = p["R"]
    geo = cfg.build_geometry(r_max=R)
    spec = cfg.build_equation()
    nodes = cfg.solver.get("nodes_per_unit", IDENTITY_NODES_PER_UNIT)
    sol = solve_ball(geo, spec, R, p["boundary"], cfg.newton, nodes)
    if not sol.converged:
        raise SolverError(f"base solve did not converge: {sol.message}")
    reports = []
    for beta in p["betas"]:
        if geo.has_drift:
            rep = check_identity_drift(geo, sol, beta, p["m"], p["levels"], cfg.newton)
        else:
            rep = check_identity(geo, sol, beta, p["levels"], cfg.newton)
        reports.append(dict(rep.to_dict(), passed=rep.passed()))
    out.payload["identity"] = reports
    out.plots.append("identity-order")
    out.checks["identity"] = all(r["passed"] for r in reports)


def _oracle(cfg: RunConfig, out: Outcome):
    spec = cfg.build_equation()
    rows = []
    for n in cfg.params["dims"]:
        row = {"n": n}
        try:
            sel = select_beta(spec, n)
            res = beta_inequality_oracle(n, spec, sel.beta, sel.L)
            row.update(case=sel.case_label, beta=sel.beta, L=sel.L, halvings=sel.halvings,
                       worst_margin=res.worst_margin, passed=res.passed, note="")
        except EquationError as exc:
            row.update(passed=False, note=str(exc))
        rows.append(row)
    out.payload["oracle"] = rows
    out.tables.append(("oracle", rows, ["n", "case", "beta", "L", "halvings", "worst_margin",
                                        "passed", "note"]))
    out.checks["oracle"] = all(r["passed"] for r in rows)


def fixture_label(cfg: RunConfig) -> str | None:
    """Label of the calibrated Liouville case matching this geometry and equation."""
    warp = cfg.geometry.get("warp", {"kind": "euclidean"})
    kind = warp.get("kind", "euclidean")
    if cfg.geometry.get("drift") or warp.get("kappa", -1.0 if kind == "hyperbolic" else 0.0) not in (-1.0, 0.0):
        return None
    spec = cfg.build_equation()
    for case in LIOUVILLE_CASES:
        g = case["geometry"]
        if g["warp"] == kind and g["n"] == cfg.geometry["dim"] and \
                EquationSpec.from_config(case["equation"]).to_config() == spec.to_config():
            return case["label"]
    return None


def _liouville(cfg: RunConfig, out: Outcome):
    p = cfg.params
    geo = cfg.build_geometry(r_max=max(p["radii"]))
    label = p["label"] or fixture_label(cfg)
    reports = check_liouville(geo, cfg.build_equation(), p["radii"], p["boundaries"], label=label,
                              config=cfg.newton, nodes_per_unit=cfg.nodes_per_unit)
    out.payload["liouville"] = [r.to_dict() for r in reports]
    out.plots.append("liouville-convergence")
    out.checks["liouville"] = all_passed(reports)


def _closed(cfg: RunConfig, out: Outcome):
    p = cfg.params
    rep = check_closed_liouville(p["kappa"], cfg.build_equation(), int(p["count"]), cfg.seed,
                                 n=cfg.geometry["dim"], config=cfg.newton)
    out.payload["closed"] = rep.to_dict()
    out.checks["closed"] = rep.passed


def _sweep_results(cfg: RunConfig, out: Outcome):
    if "members" not in out.payload:
        members = members_from_config(cfg.sweep) if cfg.sweep else default_sweep()
        results = run_sweep(members, cfg.workers, cfg.newton, cfg.nodes_per_unit, cfg.polar_shape)
        good, dropped = usable(results)
        if not good:
            raise SweepError("no sweep member converged")
        rows = []
        for res in results:
            d = res.to_dict()
            row = dict(res.key, K=res.K, converged=res.converged, error=res.error)
            row.update({k: d.get(k) for k in ("sup_u", "inf_u", "sup_grad_log_sq", "log_ratio")})
            rows.append(row)
        out.payload["members"] = rows
        out.payload["dropped"] = [{"key": k, "reason": why} for k, why in dropped]
        out.tables.append(("members", rows, ["geometry", "equation", "family", "R", "K", "converged",
                                             "sup_u", "inf_u", "sup_grad_log_sq", "log_ratio", "error"]))
        out.payload["_results"] = good
    return out.payload["_results"]


def _estimates(cfg: RunConfig, out: Outcome, name: str):
    good = _sweep_results(cfg, out)
    mode = cfg.params["mode"]
    if name == "gradient-bound":
        reports = check_gradient_bound(good, "global-A" if mode == "global" else mode)
    else:
        reports = check_harnack(good, mode)
    out.payload.setdefault("estimates", []).extend(r.to_dict() for r in reports)
    if "bound-vs-R" not in out.plots:
        out.plots.append("bound-vs-R")
    out.checks[name] = all_passed(reports)


_CHECK_RUNNERS = {
    "identity": _identity,
    "oracle": _oracle,
    "liouville": _liouville,
    "closed": _closed,
    "gradient-bound": lambda cfg, out: _estimates(cfg, out, "gradient-bound"),
    "harnack": lambda cfg, out: _estimates(cfg, out, "harnack"),
}


def run_verify(cfg: RunConfig) -> Outcome:
    out = Outcome({})
    for name in cfg.check:
        _CHECK_RUNNERS[name](cfg, out)
    out.payload.pop("_results", None)
    return out


def run_sweep_command(cfg: RunConfig) -> Outcome:
    out = Outcome({})
    _sweep_results(cfg, out)
    for name in cfg.check:
        _estimates(cfg, out, name)
    out.payload.pop("_results", None)
    return out


def run_jflow(cfg: RunConfig) -> Outcome:
    p = cfg.params
    geo = cfg.build_geometry(r_max=p["R"])
    state = solve_j_equation(geo, p["delta"], p["R"], p["T"], p["convention"], p["K"],
                             int(p["M"]), p["dt"])
    kq = k_quantity(geo, p["p"], p["R"], p["K"])
    c_fit = fit_j_decay(state, kq.k, p["p"], geo.n)
    envelope = None
    if c_fit is not None:
        envelope = j_decay(state.delta, kq.k, p["p"], geo.n, state.R, state.times, c_fit)
    in_range = bool(np.all(state.J > 0) and np.all(state.J <= 1))
    flat = not np.any(state.ric_minus > 0)
    identically_one = bool(np.all(state.J == 1.0)) if flat else None
    record = {"convention": state.convention, "delta": state.delta, "R": state.R, "T": p["T"],
              "K": state.K, "p": p["p"], "k": kq.k, "C_fit": c_fit, "halvings": state.halvings,
              "dt_initial": state.dt_initial, "in_range": in_range, "identically_one": identically_one,
              "times": state.times, "min_J": state.min_J, "max_J": state.max_J, "envelope": envelope}
    out = Outcome({"jflow": [record]}, plots=["jflow-decay"])
    rows = [{"t": t, "min_J": lo, "max_J": hi, "j_decay": None if envelope is None else envelope[i]}
            for i, (t, lo, hi) in enumerate(state.slices())]
    out.tables.append(("slices", rows, ["t", "min_J", "max_J", "j_decay"]))
    out.checks["jflow"] = in_range and c_fit is not None and identically_one is not False
    return out


def run_kquant(cfg: RunConfig) -> Outcome:
    p = cfg.params
    geo = cfg.build_geometry(r_max=p["R"])
    rep = k_quantity(geo, p["p"], p["R"], p["K"], int(p["intervals"])).to_dict()
    return Outcome({"k_quantity": rep}, [("k", [rep], list(rep))])


RUNNERS = {
    "constants": run_constants,
    "solve": run_solve,
    "verify": run_verify,
    "sweep": run_sweep_command,
    "jflow": run_jflow,
    "kquant": run_kquant,
}


# -- output -----------------------------------------------------------------------

def write_outputs(cfg: RunConfig, outcome: Outcome, report: dict) -> list:
    """Serialize the report, tables, plot data and figures; returns the written paths."""
    out_dir = Path(cfg.output["dir"])
    fmt = cfg.output["format"]
    sub = cfg.subcommand
    paths = [write_json(out_dir / f"{sub}.json", report)]
    for name, rows, columns in outcome.tables:
        tagged = [dict(row, config_hash=report["config_hash"]) for row in rows]
        paths.append(write_table(out_dir / f"{sub}-{name}.{fmt}", tagged, list(columns) + ["config_hash"], fmt))
    for kind in outcome.plots:
        paths.append(emit_plot_data(report, kind, out_dir, fmt))
        paths.append(plot_kind(plot_rows(report, kind), kind, out_dir / f"plot-{kind}.png"))
    if outcome.profile is not None:
        paths.append(plot_profile(*outcome.profile, out_dir / f"{sub}-profile.png"))
    return paths


# -- argument handling --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (omit to print the report only)")
    common.add_argument("--seed", type=int, help="seed for random profiles")
    common.add_argument("--workers", type=int,
                        help="parallel sweep workers (default: $AC_ESTIMATES_WORKERS or CPU count)")
    common.add_argument("--check", action="append", choices=CHECKS, help="check to run (repeatable)")
    common.add_argument("--format", choices=FORMATS, help="table format (default csv)")
    common.add_argument("--n", type=float, help="dimension")
    common.add_argument("--K", type=float, help="Ricci lower-bound constant")
    common.add_argument("--R", type=float, help="ball radius")
    common.add_argument("--beta", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--preset", help="equation preset")
    common.add_argument("--warp", choices=("euclidean", "spherical", "hyperbolic"))
    common.add_argument("--kappa", type=float, help="sectional curvature of the space form")
    common.add_argument("--boundary", type=float, help="constant Dirichlet value")
    common.add_argument("--delta", type=float)
    common.add_argument("--T", type=float, help="final time of the J-flow")
    common.add_argument("--convention", choices=("multiplicative", "as-written"))
    common.add_argument("--p", type=float, help="integrability exponent")
    common.add_argument("--mode", choices=("scaling-fit", "global"))

    parser = argparse.ArgumentParser(prog="ac-estimates", description=__doc__.splitlines()[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "constants": "N(n), A(n, K) and the explicit gradient bound",
        "solve": "solve one Dirichlet problem (or the closed sphere)",
        "verify": "run numerical checks",
        "sweep": "parameter sweep with optional fitted checks",
        "jflow": "auxiliary J-flow and its decay envelope",
        "kquant": "integral curvature quantity k(p, R)",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(args, sub: str, file_cfg: dict) -> tuple[dict, dict]:
    """Turn flags into config overrides; returns (file config, overrides)."""
    file_cfg = dict(file_cfg)
    params = {}
    geometry = {}
    if args.preset is not None:
        file_cfg["equation"] = {"preset": args.preset}
    if args.warp is not None or args.kappa is not None:
        kind = args.warp
        if kind is None:
            kind = "euclidean" if args.kappa == 0 else ("spherical" if args.kappa > 0 else "hyperbolic")
        warp = {"kind": kind}
        if args.kappa is not None and kind != "euclidean":
            warp["kappa"] = args.kappa
        geometry["warp"] = warp
        if sub == "verify" and args.kappa is not None:
            params["kappa"] = args.kappa
    if args.n is not None:
        if sub == "constants":
            params["n"] = args.n
        else:
            if args.n != int(args.n):
                raise ConfigError("--n", "dimension must be an integer here")
            geometry["dim"] = int(args.n)
            if sub == "verify":
                params["dims"] = [int(args.n)]
    simple = {"K": args.K, "R": args.R, "eps": args.eps, "boundary": args.boundary,
              "delta": args.delta, "T": args.T, "convention": args.convention, "p": args.p,
              "mode": args.mode}
    if args.beta is not None:
        simple["betas" if sub == "verify" else "beta"] = [args.beta] if sub == "verify" else args.beta
    for key, value in simple.items():
        if value is None:
            continue
        if key not in PARAM_DEFAULTS[sub]:
            raise ConfigError(f"--{key}", f"not used by {sub!r}")
        params[key] = value
    overrides = {"params": params, "geometry": geometry}
    if args.check:
        overrides["check"] = list(args.check)
    return file_cfg, overrides


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand
    try:
        file_cfg = read_json(args.config) if args.config else {}
        file_cfg, overrides = _overrides(args, sub, file_cfg)
        cfg = build_run_config(sub, file_cfg, overrides, seed=args.seed, workers=args.workers,
                               out_dir=args.out, fmt=args.format)
        outcome = RUNNERS[sub](cfg)
        passed = all(outcome.checks.values()) if outcome.checks else None
        report = {"subcommand": sub, "config": cfg.resolved(), "config_hash": cfg.hash,
                  "checks": outcome.checks, "passed": passed, **outcome.payload}
        if cfg.output["dir"] is not None:
            paths = write_outputs(cfg, outcome, report)
            print(dumps({"subcommand": sub, "config_hash": cfg.hash, "checks": outcome.checks,
                         "passed": passed, "outputs": [str(p) for p in paths]}), end="")
        else:
            print(dumps(report), end="")
    except ERRORS as exc:
        print(f"ac-estimates {sub}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in outcome.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return EXIT_OK if passed in (None, True) else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
