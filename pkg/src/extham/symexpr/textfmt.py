"""Plain-text expression format.

Grammar (a subset of Python expression syntax, parsed with :mod:`ast`)::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | "+" unary | power
    power    := atom ["**" ["-"] INTEGER]
    atom     := NUMBER | NAME | "pi" | FUNC "(" expr ")"
              | TAG "[" ["-"] NUMBER "]" "(" expr ")" | "(" expr ")"
    FUNC     := sin | cos | sinh | cosh | exp | sqrt | tan | tanh
    TAG      := S | C | T | CT          (tagged functions, kappa in brackets)

Numbers are written with ``repr`` so that text round-trips bit-exactly.
Names resolve against the variables handed to :func:`parse_expr`.
"""
from __future__ import annotations

import ast
import math
from typing import Iterable, Mapping

from .nodes import (
    PLAIN_FUNCS,
    TAGGED_FUNCS,
    Add,
    Const,
    Expr,
    ExpressionError,
    Func,
    Mul,
    Pow,
    Var,
    Variable,
    const,
    func,
    power,
    tan,
    tanh,
    var,
)


class ParseError(ExpressionError, ValueError):
    pass


def _num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        s = _num(e.value)
        return s, (_PREC_UNARY if e.value < 0 else _PREC_ATOM)
    if isinstance(e, Var):
        return e.var.name, _PREC_ATOM
    if isinstance(e, Func):
        inner, _ = _fmt(e.arg)
        if e.kappa is None:
            return f"{e.name}({inner})", _PREC_ATOM
        return f"{e.name}[{_num(e.kappa)}]({inner})", _PREC_ATOM
    if isinstance(e, Pow):
        if e.exp < 0:
            den = _fmt_pow(e.base, -e.exp)
            return f"1/{den}", _PREC_MUL
        return _fmt_pow(e.base, e.exp), _PREC_POW
    if isinstance(e, Mul):
        return _fmt_mul(e)
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.args):
            neg, body = _negated(t)
            if i == 0:
                s, p = _fmt(t)
                parts.append(s)
            else:
                s, p = _fmt(body)
                if p <= _PREC_ADD or (not neg and p == _PREC_UNARY):
                    s = f"({s})"
                parts.append((" - " if neg else " + ") + s)
        return "".join(parts), _PREC_ADD
    raise TypeError(type(e).__name__)


def _wrap(e: Expr, min_prec: int) -> str:
    s, p = _fmt(e)
    return f"({s})" if p < min_prec else s


def _fmt_pow(base: Expr, n: int) -> str:
    b = _wrap(base, _PREC_ATOM)
    return b if n == 1 else f"{b}**{n}"


def _negated(t: Expr):
    if isinstance(t, Const) and t.value < 0:
        return True, const(-t.value)
    if isinstance(t, Mul) and isinstance(t.args[0], Const) and t.args[0].value < 0:
        c = -t.args[0].value
        rest = t.args[1:]
        from .nodes import mul

        return True, mul(c, *rest)
    return False, t


def _fmt_mul(e: Mul) -> tuple[str, int]:
    coeff = 1.0
    num, den = [], []
    for f in e.args:
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Pow) and f.exp < 0:
            den.append(_fmt_pow(f.base, -f.exp))
        else:
            num.append(_wrap(f, _PREC_POW))
    sign = ""
    if coeff < 0:
        sign = "-"
        coeff = -coeff
    if coeff != 1.0:
        num.insert(0, _num(coeff))
    body = "*".join(num) if num else "1"
    if den:
        d = den[0] if len(den) == 1 else "(" + "*".join(den) + ")"
        body = f"{body}/{d}"
    return sign + body, (_PREC_UNARY if sign else _PREC_MUL)


def format_expr(e: Expr) -> str:
    """Render ``e`` in the text grammar (always re-parseable)."""
    return _fmt(e)[0]


def _variable_table(variables) -> dict[str, Variable]:
    if variables is None:
        return {}
    if isinstance(variables, Mapping):
        out = {}
        for k, v in variables.items():
            out[k] = v.var if isinstance(v, Var) else v
        return out
    out = {}
    for v in variables:
        v = v.var if isinstance(v, Var) else v
        out[v.name] = v
    return out


def parse_expr(text: str, variables: Iterable | Mapping | None = None) -> Expr:
    """Parse text in the grammar above.  Unknown names raise :class:`ParseError`."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    table = _variable_table(variables)
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"syntax error in {text!r}: {exc.msg}") from exc
    return _build(tree.body, table)


def _number(node) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    raise ParseError("expected a numeric literal")


def _build(node, table) -> Expr:
    if isinstance(node, ast.Constant):
        return const(_number(node))
    if isinstance(node, ast.Name):
        if node.id in table:
            return var(table[node.id])
        if node.id == "pi":
            return const(math.pi)
        raise ParseError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp):
        x = _build(node.operand, table)
        if isinstance(node.op, ast.USub):
            return -x
        if isinstance(node.op, ast.UAdd):
            return x
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            try:
                n = _number(node.right)
            except ParseError:
                raise ParseError("exponent must be an integer literal") from None
            if not n.is_integer():
                raise ParseError("exponent must be an integer literal")
            return power(_build(node.left, table), int(n))
        x = _build(node.left, table)
        y = _build(node.right, table)
        if isinstance(node.op, ast.Add):
            return x + y
        if isinstance(node.op, ast.Sub):
            return x - y
        if isinstance(node.op, ast.Mult):
            return x * y
        if isinstance(node.op, ast.Div):
            return x / y
    if isinstance(node, ast.Call) and len(node.args) == 1 and not node.keywords:
        arg = _build(node.args[0], table)
        f = node.func
        if isinstance(f, ast.Name):
            if f.id in PLAIN_FUNCS:
                return func(f.id, arg)
            if f.id == "tan":
                return tan(arg)
            if f.id == "tanh":
                return tanh(arg)
            raise ParseError(f"unknown function {f.id!r}")
        if isinstance(f, ast.Subscript) and isinstance(f.value, ast.Name) and f.value.id in TAGGED_FUNCS:
            kappa = _number(f.slice)
            return func(f.value.id, arg, kappa)
    raise ParseError(f"unsupported syntax: {ast.dump(node)[:60]}")
