"""Explicit constants and closed-form bounds for the gradient estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

CLOSED_FORM = "closed-form"
IMPL_FITTED = "implementation-fitted"
IMPL_CHOSEN = "implementation-chosen"


class ConstantsError(ValueError):
    pass


def golden_section(func, lo: float, hi: float, rel_tol: float = 1e-10, max_iter: int = 200):
    """Minimise a unimodal function on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * max(abs(a), abs(b), 1e-300):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = func(d)
    x = 0.5 * (a + b)
    return x, func(x)


def beta_interval(n: float) -> tuple[float, float, bool]:
    """Admissible beta range (0, 1/(sqrt n - 1)) intersected with (0, n - 1].

    Returns (0, upper, upper_included).
    """
    if n <= 1:
        raise ConstantsError("the beta range is defined for n > 1")
    open_end = 1.0 / (math.sqrt(n) - 1.0)
    closed_end = n - 1.0
    if closed_end < open_end:
        return 0.0, closed_end, True
    return 0.0, open_end, False


def N_of(n: float) -> float:
    return N_with_attainment(n)[0]


def N_with_attainment(n: float) -> tuple[float, bool]:
    """sup of (2/n)(1 + beta) over the admissible beta range, and whether it is attained."""
    _, upper, included = beta_interval(n)
    return 2.0 / n * (1.0 + upper), included


def _a_objective(n: float, K: float):
    def h(beta):
        num = max(K - 2.0 / n * (1.0 + beta), 0.0)
        den = (1.0 + beta) ** 2 / n - beta**2
        if num == 0.0:
            return 0.0
        return num / den if den > 0 else math.inf
    return h


@dataclass
class AResult:
    value: float
    beta: float | None
    attained: bool


def A_detail(n: float, K: float, grid_points: int = 1000) -> AResult:
    """A(n, K) with the minimising beta and an attainment flag."""
    if n <= 1:
        raise ConstantsError("A(n, K) is defined for n > 1")
    if K < 0:
        raise ConstantsError("K must be non-negative")
    _, upper, included = beta_interval(n)
    if K <= N_of(n):
        beta0 = max(0.0, min(upper, n * K / 2.0 - 1.0))
        # the positive part vanishes on [beta0, upper); any such beta attains 0
        return AResult(0.0, beta0 if (beta0 < upper or included) else None, beta0 < upper or included)
    h = _a_objective(n, K)
    # coarse grid clustered at both endpoints
    u = 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, grid_points)))
    betas = u[1:] * upper
    if not included:
        betas = betas[:-1]
    vals = np.array([h(b) for b in betas])
    k = int(np.argmin(vals))
    if included and k == len(betas) - 1:
        lo = betas[k - 1]
        x, fx = golden_section(h, lo, upper)
        if h(upper) <= fx:
            x, fx = upper, h(upper)
        return AResult(fx, x, True)
    lo = betas[k - 1] if k > 0 else betas[0] * 1e-6
    hi = betas[k + 1] if k + 1 < len(betas) else 0.5 * (betas[k] + upper)
    x, fx = golden_section(h, lo, hi)
    return AResult(fx, x, True)


def A_of(n: float, K: float) -> float:
    """inf over admissible beta of (K - 2(1+beta)/n)^+ / ((1+beta)^2/n - beta^2)."""
    return A_detail(n, K).value


@dataclass
class BoundEvaluation:
    value: float
    beta_used: float
    eps_used: float
    attained: bool
    components: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "beta": self.beta_used,
            "eps": self.eps_used,
            "attained": self.attained,
            "components": dict(self.components),
            "provenance": dict(self.provenance),
        }


def eps_upper(n: float, beta: float) -> float:
    return 2.0 / n * (1.0 + 1.0 / beta) ** 2 - 2.0


def default_eps(n: float, beta: float) -> float:
    return 0.5 * min(eps_upper(n, beta), 1.0)


def check_beta_eps(n: float, beta: float, eps: float) -> None:
    _, upper, included = beta_interval(n)
    if not (beta > 0 and (beta < upper or (included and beta == upper))):
        raise ConstantsError(f"beta = {beta} outside the admissible range for n = {n}")
    if not 0 < eps < eps_upper(n, beta):
        raise ConstantsError(f"eps = {eps} outside (0, {eps_upper(n, beta)})")


def explicit_term(n: float, K: float, beta: float, eps: float) -> float:
    num = max(K - 2.0 / n * (1.0 + beta), 0.0)
    den = (1.0 + beta) ** 2 / n - beta**2 - 0.5 * eps * beta**2
    return num / den


def local_gradient_bound(n: float, K: float, R: float, beta: float | None = None,
                         eps: float | None = None, c_impl: float = 1.0,
                         c_provenance: str = IMPL_CHOSEN) -> BoundEvaluation:
    """Local log-gradient bound: explicit term + C/R^2 + C sqrt(K)/R.

    The constant C is not given in closed form by the estimate; it is
    carried as ``c_impl`` with its own provenance tag.  ``R`` may be inf.
    """
    if K < 0:
        raise ConstantsError("K must be non-negative")
    if not R > 0:
        raise ConstantsError("R must be positive")
    if not c_impl > 0:
        raise ConstantsError("c_impl must be positive")
    attained = True
    if beta is None:
        detail = A_detail(n, K)
        _, upper, included = beta_interval(n)
        beta = detail.beta if detail.beta else 0.5 * upper
        if beta >= upper and not included:
            beta = 0.5 * upper
        attained = detail.attained
    if eps is None:
        eps = default_eps(n, beta)
    check_beta_eps(n, beta, eps)
    first = explicit_term(n, K, beta, eps)
    inv_r2 = 0.0 if math.isinf(R) else c_impl / R**2
    sqrt_k = 0.0 if math.isinf(R) else c_impl * math.sqrt(K) / R
    return BoundEvaluation(
        value=first + inv_r2 + sqrt_k,
        beta_used=beta,
        eps_used=eps,
        attained=attained,
        components={"explicit": first, "inv_R2": inv_r2, "sqrtK_over_R": sqrt_k},
        provenance={"explicit": CLOSED_FORM, "inv_R2": c_provenance,
                    "sqrtK_over_R": c_provenance},
    )


def harnack_global_bound(n: float, K: float, R: float) -> float:
    """exp(sqrt(A(n, K)) R): the sup/inf ratio bound for entire solutions."""
    if R < 0:
        raise ConstantsError("R must be non-negative")
    if R == 0:
        return 1.0
    return math.exp(math.sqrt(A_of(n, K)) * R)


def j_decay(delta: float, k: float, p: float, n: float, R: float, t, c_impl: float):
    """Lower envelope J_R(t) for the auxiliary flow, with implementation constant c_impl."""
    if not 0 < delta < 0.2:
        raise ConstantsError("delta must lie in (0, 1/5)")
    if p <= n / 2:
        raise ConstantsError("need p > n/2")
    if k < 0 or c_impl <= 0:
        raise ConstantsError("need k >= 0 and c_impl > 0")
    q = 5.0 / delta - 1.0
    prefactor = 2.0 ** (-1.0 / q)
    rate = c_impl * k * (1.0 + (c_impl * q * k) ** (n / (2 * p - n))) / R**2
    return prefactor * np.exp(-rate * np.asarray(t, dtype=float))
