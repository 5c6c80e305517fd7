"""Closed-form radial profiles with exact derivatives.

Warp functions f(r) and drift profiles v(r) are written as expressions in
the single variable ``r`` over a small grammar: numbers, ``+ - * /``,
powers, and the functions sin, cos, sinh, cosh, exp, sqrt.  Derivatives
are taken symbolically, so curvature built from f', f'' carries no
differencing error.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

R_SYMBOL = sp.Symbol("r", real=True)

_ALLOWED_FUNCS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "exp": sp.exp,
    "sqrt": sp.sqrt,
}
_ALLOWED_CLASSES = (sp.sin, sp.cos, sp.sinh, sp.cosh, sp.exp)

# number of Taylor coefficients kept for the near-pole expansions
SERIES_TERMS = 8


class ExpressionError(ValueError):
    """Raised when an expression falls outside the supported grammar."""


def _check_grammar(expr: sp.Expr) -> None:
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Symbol):
            if node != R_SYMBOL:
                raise ExpressionError(f"unknown symbol {node!s}; only 'r' is allowed")
        elif isinstance(node, (sp.Number, sp.NumberSymbol)):
            continue
        elif isinstance(node, (sp.Add, sp.Mul, sp.Pow)):
            continue
        elif isinstance(node, _ALLOWED_CLASSES):
            continue
        else:
            raise ExpressionError(f"unsupported construct {type(node).__name__} in {expr}")


def parse(source: str | sp.Expr) -> sp.Expr:
    if isinstance(source, sp.Expr):
        expr = source
    else:
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError("expression must be a non-empty string")
        local = dict(_ALLOWED_FUNCS, r=R_SYMBOL, pi=sp.pi, E=sp.E)
        try:
            expr = parse_expr(
                source.replace("^", "**"),
                local_dict=local,
                global_dict={"Integer": sp.Integer, "Float": sp.Float,
                             "Rational": sp.Rational, "Symbol": sp.Symbol},
                transformations=standard_transformations,
                evaluate=True,
            )
        except ExpressionError:
            raise
        except Exception as exc:  # tokenizer/eval errors surface as many types
            raise ExpressionError(f"cannot parse {source!r}: {exc}") from exc
    expr = sp.sympify(expr)
    _check_grammar(expr)
    return expr


def _vectorize(func, r):
    r = np.asarray(r, dtype=float)
    out = func(r)
    return np.broadcast_to(np.asarray(out, dtype=float), r.shape).copy() if r.ndim else float(out)


class RadialFunction:
    """A scalar function of r together with its first two derivatives."""

    def __init__(self, source: str | sp.Expr):
        self.expr = parse(source)
        self.text = str(self.expr)
        d1 = sp.diff(self.expr, R_SYMBOL)
        d2 = sp.diff(d1, R_SYMBOL)
        self._f = sp.lambdify(R_SYMBOL, self.expr, "numpy")
        self._df = sp.lambdify(R_SYMBOL, d1, "numpy")
        self._ddf = sp.lambdify(R_SYMBOL, d2, "numpy")

    def __repr__(self) -> str:
        return f"RadialFunction({self.text!r})"

    def __reduce__(self):
        # lambdified callables do not pickle; rebuild from the source text
        return (radial_function, (self.text,))

    def __eq__(self, other) -> bool:
        return isinstance(other, RadialFunction) and self.text == other.text

    def __hash__(self) -> int:
        return hash(self.text)

    def value(self, r):
        return _vectorize(self._f, r)

    def d1(self, r):
        return _vectorize(self._df, r)

    def d2(self, r):
        return _vectorize(self._ddf, r)

    def taylor(self, terms: int = SERIES_TERMS) -> np.ndarray:
        """Taylor coefficients c_k of the expansion about r = 0."""
        return _taylor_coefficients(self.text, terms)


@lru_cache(maxsize=256)
def _taylor_coefficients(text: str, terms: int) -> np.ndarray:
    expr = parse(text)
    coeffs = []
    d = expr
    for k in range(terms):
        val = sp.limit(d, R_SYMBOL, 0) if k == 0 else d.subs(R_SYMBOL, 0)
        if val.has(sp.nan, sp.zoo, sp.oo):
            val = sp.limit(d, R_SYMBOL, 0)
        coeffs.append(float(val) / float(sp.factorial(k)))
        d = sp.diff(d, R_SYMBOL)
    out = np.array(coeffs)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def radial_function(source: str) -> RadialFunction:
    return RadialFunction(source)


# -- power series helpers (coefficient arrays, lowest order first) ----------

def series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = min(len(a), len(b))
    return np.convolve(a[:n], b[:n])[:n]


def series_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Power series quotient a/b, requires b[0] != 0."""
    n = min(len(a), len(b))
    q = np.zeros(n)
    for k in range(n):
        q[k] = (a[k] - np.dot(q[:k], b[k:0:-1])) / b[0]
    return q


def laurent_eval(c: np.ndarray, shift: int, r):
    """Evaluate sum_k c_k r^(k - shift).

    The regular part is summed by Horner; singular terms (k < shift) are
    added separately and must vanish when r == 0.
    """
    r = np.asarray(r, dtype=float)
    acc = np.zeros_like(r)
    for ck in c[shift:][::-1]:
        acc = acc * r + ck
    # singular coefficients at roundoff level are zero in exact arithmetic
    noise = 1e-13 * float(np.max(np.abs(c))) if len(c) else 0.0
    for k in range(min(shift, len(c))):
        if abs(c[k]) > noise:
            with np.errstate(divide="ignore", over="ignore"):
                acc = acc + c[k] * np.where(r > 0, r, np.nan) ** (k - shift)
    return acc
