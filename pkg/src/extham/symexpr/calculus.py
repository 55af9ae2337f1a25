"""Exact differentiation and the momentum-polynomial normal form."""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

from .nodes import (
    ONE,
    ZERO,
    Add,
    C,
    Const,
    Expr,
    Func,
    Mul,
    NonPolynomialError,
    Pow,
    S,
    Var,
    Variable,
    add,
    as_expr,
    cos,
    cosh,
    mul,
    power,
    sin,
    sinh,
    var,
)


def _as_variable(v) -> Variable:
    if isinstance(v, Variable):
        return v
    if isinstance(v, Var):
        return v.var
    raise TypeError(f"expected a Variable, got {type(v).__name__}")


def diff(e: Expr, v) -> Expr:
    """Partial derivative of ``e`` with respect to variable ``v``."""
    return _diff(as_expr(e), _as_variable(v))


@lru_cache(maxsize=200_000)
def _diff(e: Expr, v: Variable) -> Expr:
    if v not in e.free:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(_diff(t, v) for t in e.args))
    if isinstance(e, Mul):
        terms = []
        fs = e.args
        for i, f in enumerate(fs):
            df = _diff(f, v)
            if df is ZERO:
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1 :]))
        return add(*terms)
    if isinstance(e, Pow):
        return mul(e.exp, power(e.base, e.exp - 1), _diff(e.base, v))
    if isinstance(e, Func):
        inner = _diff(e.arg, v)
        return mul(_func_derivative(e), inner)
    raise TypeError(f"no derivative rule for {type(e).__name__}")


def _func_derivative(f: Func) -> Expr:
    x = f.arg
    k = f.kappa
    name = f.name
    if name == "sin":
        return cos(x)
    if name == "cos":
        return -sin(x)
    if name == "sinh":
        return cosh(x)
    if name == "cosh":
        return sinh(x)
    if name == "exp":
        return f
    if name == "sqrt":
        return mul(0.5, power(f, -1))
    if name == "S":
        return C(k, x)
    if name == "C":
        return mul(-k, S(k, x))
    if name == "T":
        # (C^2 + k S^2) / C^2 = 1 / C^2
        return power(C(k, x), -2)
    if name == "CT":
        return mul(-1, power(S(k, x), -2))
    raise TypeError(f"no derivative rule for {name}")


def gradient(e: Expr, variables: Iterable) -> list[Expr]:
    return [diff(e, v) for v in variables]


# -- momentum polynomials ---------------------------------------------------

Monomial = tuple  # exponent tuple aligned with a momentum list
Poly = dict  # Monomial -> coordinate-only Expr


def _poly_add(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for m, c in q.items():
        out[m] = add(out[m], c) if m in out else c
    return {m: c for m, c in out.items() if c is not ZERO}


def _poly_mul(p: Poly, q: Poly) -> Poly:
    acc: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(x + y for x, y in zip(m1, m2))
            acc.setdefault(m, []).append(mul(c1, c2))
    out = {m: add(*cs) for m, cs in acc.items()}
    return {m: c for m, c in out.items() if c is not ZERO}


def to_polynomial(e: Expr, momenta: Sequence[Variable] | None = None) -> tuple[tuple[Variable, ...], Poly]:
    """Expand ``e`` into ``{exponents: coefficient}`` over the momentum variables.

    Coordinate-only subexpressions are kept factored inside the coefficients.
    Raises :class:`NonPolynomialError` if a momentum sits inside a primitive
    function or under a negative power.
    """
    e = as_expr(e)
    if momenta is None:
        momenta = sorted((v for v in e.free if v.is_momentum), key=lambda v: var(v).sort_key)
    momenta = tuple(momenta)
    index = {v: i for i, v in enumerate(momenta)}
    zero_m = (0,) * len(momenta)
    memo: dict[int, Poly] = {}

    def rec(node: Expr) -> Poly:
        key = id(node)
        if key in memo:
            return memo[key]
        if not any(v in index for v in node.free):
            if any(v.is_momentum for v in node.free):
                raise NonPolynomialError(f"momentum outside the declared list in {node}")
            out = {} if node is ZERO else {zero_m: node}
        elif isinstance(node, Var):
            m = list(zero_m)
            m[index[node.var]] = 1
            out = {tuple(m): ONE}
        elif isinstance(node, Add):
            out = {}
            for t in node.args:
                out = _poly_add(out, rec(t))
        elif isinstance(node, Mul):
            out = {zero_m: ONE}
            for f in node.args:
                out = _poly_mul(out, rec(f))
        elif isinstance(node, Pow):
            if node.exp < 0:
                raise NonPolynomialError(f"momentum under a negative power in {node}")
            base = rec(node.base)
            out = {zero_m: ONE}
            for _ in range(node.exp):
                out = _poly_mul(out, base)
        else:
            raise NonPolynomialError(f"momentum inside {getattr(node, 'name', type(node).__name__)}(...)")
        memo[key] = out
        return out

    return momenta, rec(e)


def from_polynomial(momenta: Sequence[Variable], poly: Poly) -> Expr:
    terms = []
    for m in sorted(poly, key=lambda m: (-sum(m), tuple(-x for x in m))):
        factors = [power(var(v), k) for v, k in zip(momenta, m) if k]
        terms.append(mul(poly[m], *factors))
    return add(*terms)


def expand_momenta(e: Expr, momenta: Sequence[Variable] | None = None) -> Expr:
    """Rewrite ``e`` in distributive normal form in the momenta."""
    ms, poly = to_polynomial(e, momenta)
    return from_polynomial(ms, poly)


def momentum_degree(e: Expr, momenta: Sequence[Variable] | None = None, box=None, tol: float = 1e-9) -> int:
    """Total degree of ``e`` jointly in the momenta after expansion.

    Coefficients that are structurally zero never count.  When a sampling
    ``box`` is supplied, coefficients that pass a numeric zero test over it are
    discarded as well.  The zero polynomial has degree 0.
    """
    _, poly = to_polynomial(e, momenta)
    degrees = sorted({sum(m) for m in poly}, reverse=True)
    for d in degrees:
        coeffs = [c for m, c in poly.items() if sum(m) == d]
        if box is None:
            return d
        from .numeric import numeric_zero_test

        if not all(numeric_zero_test(c, box, tol=tol).is_zero for c in coeffs):
            return d
    return 0


def is_constant(e: Expr) -> bool:
    return isinstance(as_expr(e), Const)
