"""Reaction terms a u^s - b u^t and the beta/L case analysis for them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PRESETS = ("allen_cahn", "fisher_kpp", "newell_whitehead", "lane_emden")

# relative margin used to keep open-interval constraints strict
OPEN_MARGIN = 1e-6


class EquationError(ValueError):
    pass


def _power(u, e: float):
    # integer exponents by repeated multiplication keep preset residuals exact
    if float(e).is_integer() and abs(e) <= 64:
        return np.power(u, int(e)) if int(e) >= 0 else 1.0 / np.power(u, -int(e))
    return np.exp(e * np.log(u))


@dataclass(frozen=True)
class EquationSpec:
    a: float
    b: float
    s: float
    t: float
    name: str = "custom"

    def __post_init__(self):
        for key in ("a", "b", "s", "t"):
            val = getattr(self, key)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                raise EquationError(f"{key} must be a finite number")
            object.__setattr__(self, key, float(val))
        if self.a < 0 or self.b < 0:
            raise EquationError("coefficients a and b must be non-negative")
        if self.s == self.t:
            raise EquationError("exponents must differ (s != t)")

    @classmethod
    def allen_cahn(cls) -> "EquationSpec":
        return cls(1.0, 1.0, 1.0, 3.0, "allen_cahn")

    @classmethod
    def fisher_kpp(cls, a: float = 1.0, b: float | None = None) -> "EquationSpec":
        b = a if b is None else b
        if not (a > 0 and a == b):
            raise EquationError("Fisher-KPP needs a = b > 0")
        return cls(a, b, 1.0, 2.0, "fisher_kpp")

    @classmethod
    def newell_whitehead(cls, a: float = 1.0, b: float = 1.0) -> "EquationSpec":
        if not (a > 0 and b > 0):
            raise EquationError("Newell-Whitehead needs a > 0 and b > 0")
        return cls(a, b, 1.0, 3.0, "newell_whitehead")

    @classmethod
    def lane_emden(cls, a: float = 1.0, s: float = 1.5, t: float | None = None) -> "EquationSpec":
        if not a > 0:
            raise EquationError("Lane-Emden needs a > 0")
        # t is inert when b = 0; pick one that keeps the case analysis defined
        t = max(s, 1.0) + 1.0 if t is None else t
        return cls(a, 0.0, s, t, "lane_emden")

    @classmethod
    def preset(cls, name: str, **overrides) -> "EquationSpec":
        if name not in PRESETS:
            raise EquationError(f"unknown preset {name!r}; choose from {PRESETS}")
        if name == "allen_cahn":
            if overrides:
                raise EquationError("the Allen-Cahn preset takes no overrides")
            return cls.allen_cahn()
        return getattr(cls, name)(**overrides)

    @classmethod
    def from_config(cls, cfg: dict) -> "EquationSpec":
        cfg = dict(cfg)
        if "preset" in cfg:
            return cls.preset(cfg.pop("preset"), **cfg)
        missing = [k for k in ("a", "b", "s", "t") if k not in cfg]
        if missing:
            raise EquationError(f"equation config missing fields: {missing}")
        return cls(cfg["a"], cfg["b"], cfg["s"], cfg["t"])

    def to_config(self) -> dict:
        return {"a": self.a, "b": self.b, "s": self.s, "t": self.t, "name": self.name}

    def scaled(self, lam: float) -> "EquationSpec":
        return EquationSpec(lam * self.a, lam * self.b, self.s, self.t, self.name)


def _check_positive(u):
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise EquationError("reaction terms are evaluated at positive u only")
    return u


def reaction(spec: EquationSpec, u):
    """a u^s - b u^t."""
    u = _check_positive(u)
    out = spec.a * _power(u, spec.s) - spec.b * _power(u, spec.t)
    return float(out) if out.ndim == 0 else out


def reaction_derivative(spec: EquationSpec, u):
    u = _check_positive(u)
    out = spec.a * spec.s * _power(u, spec.s - 1) - spec.b * spec.t * _power(u, spec.t - 1)
    return float(out) if out.ndim == 0 else out


def reaction_quotient(spec: EquationSpec, u):
    """G(u) = a u^(s-1) - b u^(t-1), the reaction divided by u."""
    u = _check_positive(u)
    out = spec.a * _power(u, spec.s - 1) - spec.b * _power(u, spec.t - 1)
    return float(out) if out.ndim == 0 else out


def equilibrium(spec: EquationSpec) -> float:
    """The positive constant root (a/b)^(1/(t-s))."""
    if spec.b == 0:
        raise EquationError("b = 0 (Lane-Emden regime) has no positive equilibrium")
    if spec.a == 0:
        raise EquationError("a = 0 has no positive equilibrium")
    return (spec.a / spec.b) ** (1.0 / (spec.t - spec.s))


def has_equilibrium(spec: EquationSpec) -> bool:
    return spec.a > 0 and spec.b > 0


def p_critical(n: float) -> float:
    """(n+3)/(n-1), infinite for n = 1."""
    if n < 1:
        raise EquationError("p(n) is defined for n >= 1")
    if n == 1:
        return math.inf
    return (n + 3.0) / (n - 1.0)


# proof cases 1..4 under their public labels
CASE_LABELS = {1: "I", 2: "II-1", 3: "II-2", 4: "II-3"}
UNCOVERED = "uncovered"


def classify(spec: EquationSpec, dim: float) -> str:
    """Which branch of the beta/L case analysis applies to (s, t) in dimension dim."""
    if dim < 1:
        raise EquationError("dimension must be >= 1")
    s, t = spec.s, spec.t
    if s <= 1 < t:
        return CASE_LABELS[1]
    if t > s and 1 < s < p_critical(dim):
        if s <= 1 + 2 / dim:
            return CASE_LABELS[2]
        if s <= 1 + 4 / dim:
            return CASE_LABELS[3]
        return CASE_LABELS[4]
    return UNCOVERED


def proof_case(label: str) -> int | None:
    for k, v in CASE_LABELS.items():
        if v == label:
            return k
    return None


@dataclass(frozen=True)
class BetaSelection:
    beta: float
    L: float
    case_label: str
    effective_dim: float
    l: float | None = None
    halvings: int = 0

    def to_dict(self) -> dict:
        return {"beta": self.beta, "L": self.L, "case": self.case_label,
                "l": self.l, "effective_dim": self.effective_dim, "halvings": self.halvings}


def case_beta_bound(spec: EquationSpec, dim: float, label: str) -> float:
    n = dim
    if label == "I":
        return 0.5 * n * (spec.t - 1)
    if label == "II-1":
        return 0.5 * n * (spec.s - 1)
    if label == "II-2":
        return (0.5 * n * (spec.s - 1) - 1) * (1 - OPEN_MARGIN)
    raise EquationError(f"no closed-form beta bound for case {label}")


def select_beta(spec: EquationSpec, dim: float, max_halvings: int = 40) -> BetaSelection:
    """Pick (beta, L) for which the algebraic lower bound on Delta F holds.

    Cases I..II-2 take half the smaller of the case bound and 2/(2n-1)
    with L = 2; case II-3 solves s - 1 = 4l/(nl - 2) for l and sets
    beta = 4/(nl - 2), L = l - 2.  Every candidate is certified by the
    brute-force grid check, halving beta until it passes.
    """
    from .verify import beta_inequality_oracle

    label = classify(spec, dim)
    if label == UNCOVERED:
        raise EquationError(
            f"(s, t) = ({spec.s}, {spec.t}) is not covered in dimension {dim}")
    n = float(dim)
    l = None
    if label == "II-3":
        l = 2 * (spec.s - 1) / (n * (spec.s - 1) - 4)
        beta = 4 / (n * l - 2)
        L = l - 2
    else:
        beta = 0.5 * min(case_beta_bound(spec, n, label), 2 / (2 * n - 1))
        L = 2.0
    for k in range(max_halvings + 1):
        if beta_inequality_oracle(n, spec, beta, L).passed:
            return BetaSelection(beta, L, label, n, l, k)
        beta *= 0.5
    raise EquationError(f"no certified beta found for {spec} in dimension {dim}")
