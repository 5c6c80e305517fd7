"""Run configuration: JSON loading, flag overrides, validation and hashing.

Everything is validated (by building the library objects it describes)
before any compute starts.  Errors carry the dotted path of the offending
field, or the line and column for malformed JSON.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .constants import ConstantsError
from .equations import EquationError, EquationSpec
from .expressions import ExpressionError
from .geometry import GeometryError, WarpedGeometry
from .solver import NewtonConfig, SolverError
from .sweep import BoundaryFamily, SweepError

SUBCOMMANDS = ("constants", "solve", "verify", "sweep", "jflow", "kquant")
CHECKS = ("identity", "gradient-bound", "harnack", "liouville", "closed", "oracle")
FORMATS = ("csv", "json")
TOP_LEVEL = ("geometry", "equation", "solver", "check", "params", "sweep", "seed", "workers", "output")
SOLVER_GRID_KEYS = ("nodes_per_unit", "polar_shape")

# per-subcommand parameters and their defaults
PARAM_DEFAULTS = {
    "constants": {"n": 2, "K": 0.0, "R": None, "beta": None, "eps": None},
    "solve": {"R": 4.0, "boundary": 0.5, "family": None},
    "verify": {"R": 1.0, "boundary": 0.5, "betas": [0.25, 0.5, 1.0], "levels": 3, "m": None,
               "radii": [4.0, 8.0, 16.0], "boundaries": [0.2, 0.5, 2.0, 5.0], "label": None,
               "kappa": 1.0, "count": 5, "mode": "scaling-fit", "dims": [2, 3, 5]},
    "sweep": {"mode": "scaling-fit"},
    "jflow": {"delta": 0.1, "R": 2.0, "T": 1.0, "convention": "multiplicative", "p": 2.0,
              "K": 0.0, "M": 256, "dt": None},
    "kquant": {"p": 2.0, "R": 1.0, "K": 0.0, "intervals": 2048},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    geometry: dict
    equation: dict
    solver: dict
    check: tuple
    params: dict
    sweep: dict | None
    seed: int
    workers: int | None
    output: dict

    def resolved(self) -> dict:
        """Canonical dict of everything that influences the results."""
        return {"subcommand": self.subcommand, "geometry": self.geometry, "equation": self.equation,
                "solver": self.solver, "check": list(self.check), "params": self.params,
                "sweep": self.sweep, "seed": self.seed}

    @property
    def hash(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @property
    def newton(self) -> NewtonConfig:
        return NewtonConfig.from_config({k: v for k, v in self.solver.items() if k not in SOLVER_GRID_KEYS})

    @property
    def nodes_per_unit(self) -> int:
        return self.solver.get("nodes_per_unit", 512)

    @property
    def polar_shape(self) -> tuple[int, int]:
        return tuple(self.solver.get("polar_shape", (256, 128)))

    def build_geometry(self, r_max: float | None = None) -> WarpedGeometry:
        cfg = dict(self.geometry)
        if r_max is not None:
            cfg["r_max"] = r_max
        return WarpedGeometry.from_config(cfg)

    def build_equation(self) -> EquationSpec:
        return EquationSpec.from_config(self.equation)


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {str(path)!r}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a JSON object")
    return data


def _number(value, path, positive=False, non_negative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if integer and value != int(value):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if non_negative and value < 0:
        raise ConfigError(path, f"must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list")
    return value


def _wrap(path, func, *args):
    try:
        return func(*args)
    except (GeometryError, EquationError, SolverError, SweepError, ExpressionError,
            ConstantsError, TypeError, KeyError) as exc:
        detail = f"missing field {exc.args[0]!r}" if isinstance(exc, KeyError) else str(exc)
        raise ConfigError(path, detail) from exc


def _validate_geometry(cfg, path):
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected an object")
    if "dim" not in cfg:
        raise ConfigError(f"{path}.dim", "missing field")
    _number(cfg["dim"], f"{path}.dim", positive=True, integer=True)
    warp = cfg.get("warp", {"kind": "euclidean"})
    if not isinstance(warp, dict):
        raise ConfigError(f"{path}.warp", "expected an object")
    if "r_max" in cfg and cfg["r_max"] is not None:
        _number(cfg["r_max"], f"{path}.r_max", positive=True)
    trial = dict(cfg)
    if trial.get("r_max") is None and not trial.get("closed"):
        trial["r_max"] = 1.0
    _wrap(path, WarpedGeometry.from_config, trial)


def _validate_solver(cfg, path):
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected an object")
    if "nodes_per_unit" in cfg:
        _number(cfg["nodes_per_unit"], f"{path}.nodes_per_unit", positive=True, integer=True)
    if "polar_shape" in cfg:
        shape = cfg["polar_shape"]
        if not (isinstance(shape, list) and len(shape) == 2):
            raise ConfigError(f"{path}.polar_shape", "expected [M, J]")
        for i, v in enumerate(shape):
            _number(v, f"{path}.polar_shape[{i}]", positive=True, integer=True)
    for key in ("tol", "floor_fraction"):
        if key in cfg:
            _number(cfg[key], f"{path}.{key}", positive=True)
    for key in ("max_iter", "max_line_search", "ptc_max_iter"):
        if key in cfg:
            _number(cfg[key], f"{path}.{key}", positive=True, integer=True)
    _wrap(path, NewtonConfig.from_config, {k: v for k, v in cfg.items() if k not in SOLVER_GRID_KEYS})


def _validate_family(cfg, path):
    if isinstance(cfg, (int, float)) and not isinstance(cfg, bool):
        _number(cfg, path, positive=True)
        return
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected a number or a boundary-family object")
    _wrap(path, BoundaryFamily.from_config, cfg)


def _validate_sweep(cfg, path):
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected an object")
    for key in ("geometries", "radii", "boundaries"):
        if key not in cfg:
            raise ConfigError(f"{path}.{key}", "missing field")
    for i, g in enumerate(_list(cfg["geometries"], f"{path}.geometries")):
        if isinstance(g, dict) and "r_max" in g:
            raise ConfigError(f"{path}.geometries[{i}].r_max", "sweep members set r_max = 2R themselves")
        _validate_geometry(g, f"{path}.geometries[{i}]")
    for i, e in enumerate(_list(cfg.get("equations", [{"preset": "allen_cahn"}]), f"{path}.equations")):
        _wrap(f"{path}.equations[{i}]", EquationSpec.from_config, e)
    for i, R in enumerate(_list(cfg["radii"], f"{path}.radii")):
        _number(R, f"{path}.radii[{i}]", positive=True)
    for i, f in enumerate(_list(cfg["boundaries"], f"{path}.boundaries")):
        _validate_family(f, f"{path}.boundaries[{i}]")
    if "seeds" in cfg:
        for i, s in enumerate(_list(cfg["seeds"], f"{path}.seeds")):
            _number(s, f"{path}.seeds[{i}]", non_negative=True, integer=True)
    unknown = set(cfg) - {"geometries", "equations", "radii", "boundaries", "seeds"}
    if unknown:
        raise ConfigError(path, f"unknown fields {sorted(unknown)}")


def expand_sweep(cfg: dict) -> dict:
    """Replicate every fourier family once per seed in ``seeds``."""
    cfg = copy.deepcopy(cfg)
    seeds = cfg.pop("seeds", None)
    if seeds is None:
        return cfg
    families = []
    for fam in cfg["boundaries"]:
        if isinstance(fam, dict) and fam.get("kind") == "fourier":
            families.extend(dict(fam, seed=int(s)) for s in seeds)
        else:
            families.append(fam)
    cfg["boundaries"] = families
    return cfg


def _validate_params(sub, params):
    path = "params"
    unknown = set(params) - set(PARAM_DEFAULTS[sub])
    if unknown:
        raise ConfigError(path, f"unknown parameters for {sub!r}: {sorted(unknown)}")
    positive = {"R", "T", "delta", "p", "boundary", "kappa"}
    non_negative = {"K"}
    integers = {"M", "levels", "count", "intervals"}
    for key, value in params.items():
        if value is None or key in ("family", "label", "mode", "convention"):
            continue
        if isinstance(value, list):
            for i, v in enumerate(_list(value, f"{path}.{key}")):
                _number(v, f"{path}.{key}[{i}]", positive=True)
            continue
        _number(value, f"{path}.{key}", positive=key in positive, non_negative=key in non_negative,
                integer=key in integers)
    if params.get("family") is not None:
        _validate_family(params["family"], f"{path}.family")


def build_run_config(subcommand: str, file_cfg: dict | None = None, overrides: dict | None = None,
                     seed: int | None = None, workers: int | None = None,
                     out_dir: str | None = None, fmt: str | None = None) -> RunConfig:
    """Merge a config file with command-line overrides and validate the result.

    ``overrides`` uses the same layout as the file; only non-None leaves
    replace file values.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    cfg = copy.deepcopy(file_cfg or {})
    unknown = set(cfg) - set(TOP_LEVEL)
    if unknown:
        raise ConfigError("", f"unknown top-level fields {sorted(unknown)}")
    cfg.setdefault("geometry", {"dim": 2, "warp": {"kind": "euclidean"}})
    cfg.setdefault("equation", {"preset": "allen_cahn"})
    for section, values in (overrides or {}).items():
        if isinstance(values, dict):
            target = cfg.setdefault(section, {})
            if not isinstance(target, dict):
                raise ConfigError(section, "expected an object")
            target.update({k: v for k, v in values.items() if v is not None})
        elif values is not None:
            cfg[section] = values

    geometry = cfg["geometry"]
    _validate_geometry(geometry, "geometry")
    equation = cfg["equation"]
    if not isinstance(equation, dict):
        raise ConfigError("equation", "expected an object")
    _wrap("equation", EquationSpec.from_config, equation)
    solver = cfg.get("solver", {})
    _validate_solver(solver, "solver")

    check = cfg.get("check", [])
    if isinstance(check, str):
        check = [check]
    if not isinstance(check, list):
        raise ConfigError("check", "expected a list of check names")
    for i, name in enumerate(check):
        if name not in CHECKS:
            raise ConfigError(f"check[{i}]", f"unknown check {name!r}; choose from {CHECKS}")
    if subcommand == "verify" and not check:
        raise ConfigError("check", "verify needs at least one check")
    if subcommand == "sweep" and set(check) - {"gradient-bound", "harnack"}:
        raise ConfigError("check", "sweep supports only gradient-bound and harnack")

    raw_params = cfg.get("params", {})
    if not isinstance(raw_params, dict):
        raise ConfigError("params", "expected an object")
    params = dict(PARAM_DEFAULTS[subcommand])
    _validate_params(subcommand, raw_params)
    params.update(raw_params)

    sweep = cfg.get("sweep")
    if sweep is not None:
        _validate_sweep(sweep, "sweep")
        sweep = expand_sweep(sweep)

    seed = cfg.get("seed", 0) if seed is None else seed
    seed = _number(seed, "seed", non_negative=True, integer=True)
    workers = cfg.get("workers") if workers is None else workers
    if workers is not None:
        workers = _number(workers, "workers", positive=True, integer=True)

    output = dict(cfg.get("output", {}))
    if out_dir is not None:
        output["dir"] = out_dir
    if fmt is not None:
        output["format"] = fmt
    output.setdefault("dir", None)
    output.setdefault("format", "csv")
    if output["format"] not in FORMATS:
        raise ConfigError("output.format", f"expected one of {FORMATS}")

    return RunConfig(subcommand, geometry, equation, solver, tuple(check), params, sweep,
                     seed, workers, output)
