"""Immutable, hash-consed expression trees over phase-space variables.

Every node is interned: two structurally identical expressions are the same
Python object, so identity doubles as structural equality and nodes can be
used directly as dictionary keys.  Constructors apply a light normalisation
(flattening, constant folding, like-term and like-factor collection) but no
distribution; quotients are stored as negative integer powers and negation
as a ``-1`` coefficient.
"""
from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union


class ExpressionError(Exception):
    """Base class for expression-engine failures."""


class DomainError(ExpressionError, ArithmeticError):
    """Evaluation left the real domain (division by zero, sqrt of a negative, overflow)."""


class UnboundVariableError(ExpressionError, KeyError):
    """An assignment does not cover every free variable of an expression."""


class NonPolynomialError(ExpressionError, ValueError):
    """A momentum appears somewhere other than a nonnegative integer power."""


class VarKind(str, Enum):
    COORDINATE = "coordinate"
    MOMENTUM = "momentum"
    EXT_COORDINATE = "u"
    EXT_MOMENTUM = "p_u"

    @property
    def is_momentum(self) -> bool:
        return self in (VarKind.MOMENTUM, VarKind.EXT_MOMENTUM)


_KIND_ORDER = {VarKind.EXT_COORDINATE: 0, VarKind.COORDINATE: 1, VarKind.EXT_MOMENTUM: 2, VarKind.MOMENTUM: 3}


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind = VarKind.COORDINATE
    index: int = 0

    @property
    def is_momentum(self) -> bool:
        return self.kind.is_momentum

    def __str__(self) -> str:
        return self.name


_lock = threading.Lock()
_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


class Expr:
    """Base node.  Never instantiate directly; use the module constructors."""

    __slots__ = ("args", "free", "sort_key", "__weakref__")
    rank = 99

    args: tuple
    free: frozenset
    sort_key: tuple

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def __reduce__(self):
        # pickling rebuilds through the text format so interning is preserved
        from .textfmt import format_expr

        return (_rebuild, (format_expr(self), tuple(self.free)))

    @property
    def has_momenta(self) -> bool:
        return any(v.is_momentum for v in self.free)

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported; use sqrt() for 1/2")
        return power(self, n)

    def __str__(self) -> str:
        from .textfmt import format_expr

        return format_expr(self)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self}>"


def _rebuild(text, variables):
    from .textfmt import parse_expr

    return parse_expr(text, variables)


def _intern(cls, payload, args, free, sort_key):
    key = (cls, payload, tuple(id(a) for a in args))
    with _lock:
        node = _table.get(key)
        if node is None:
            node = object.__new__(cls)
            object.__setattr__(node, "args", args)
            object.__setattr__(node, "free", free)
            object.__setattr__(node, "sort_key", sort_key)
            cls._init_payload(node, payload)
            _table[key] = node
        return node


class Const(Expr):
    __slots__ = ("value",)
    rank = 0

    def _init_payload(self, payload):
        object.__setattr__(self, "value", payload)


class Var(Expr):
    __slots__ = ("var",)
    rank = 1

    def _init_payload(self, payload):
        object.__setattr__(self, "var", payload)


class Func(Expr):
    """Primitive function application; ``kappa`` is set only for the tagged family."""

    __slots__ = ("name", "kappa")
    rank = 2

    def _init_payload(self, payload):
        object.__setattr__(self, "name", payload[0])
        object.__setattr__(self, "kappa", payload[1])

    @property
    def arg(self) -> Expr:
        return self.args[0]


class Pow(Expr):
    __slots__ = ("exp",)
    rank = 3

    def _init_payload(self, payload):
        object.__setattr__(self, "exp", payload)

    @property
    def base(self) -> Expr:
        return self.args[0]


class Mul(Expr):
    __slots__ = ()
    rank = 4

    def _init_payload(self, payload):
        pass


class Add(Expr):
    __slots__ = ()
    rank = 5

    def _init_payload(self, payload):
        pass


ExprLike = Union[Expr, int, float, Variable]

PLAIN_FUNCS = ("sin", "cos", "sinh", "cosh", "exp", "sqrt")
TAGGED_FUNCS = ("S", "C", "T", "CT")
_EMPTY = frozenset()


def const(value: float) -> Const:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"non-finite constant {value!r}")
    if value == 0.0:
        value = 0.0  # fold -0.0
    return _intern(Const, value, (), _EMPTY, (0, value))


def var(v: Variable) -> Var:
    key = (1, (_KIND_ORDER[v.kind], v.index, v.name))
    return _intern(Var, v, (), frozenset((v,)), key)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)


def as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Variable):
        return var(x)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return const(x)
    if hasattr(x, "__float__"):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def _free_of(args: Iterable[Expr]) -> frozenset:
    out = _EMPTY
    for a in args:
        if a.free:
            out = out | a.free if out else a.free
    return out


def _make_mul(args: tuple) -> Expr:
    if len(args) == 1:
        return args[0]
    return _intern(Mul, None, args, _free_of(args), (4, None, tuple(a.sort_key for a in args)))


def _make_pow(base: Expr, n: int) -> Expr:
    return _intern(Pow, n, (base,), base.free, (3, n, (base.sort_key,)))


def _split_coeff(t: Expr) -> tuple[float, Expr]:
    if isinstance(t, Mul) and isinstance(t.args[0], Const):
        return t.args[0].value, _make_mul(t.args[1:])
    return 1.0, t


def add(*terms: ExprLike) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Add):
            flat.extend(t.args)
        else:
            flat.append(t)
    total = 0.0
    coeffs: dict[Expr, float] = {}
    for t in flat:
        if isinstance(t, Const):
            total += t.value
            continue
        c, rest = _split_coeff(t)
        coeffs[rest] = coeffs.get(rest, 0.0) + c
    items = sorted(((r, c) for r, c in coeffs.items() if c != 0.0), key=lambda rc: rc[0].sort_key)
    parts = []
    if total != 0.0:
        parts.append(const(total))
    for rest, c in items:
        if c == 1.0:
            parts.append(rest)
        elif isinstance(rest, Mul):
            parts.append(_make_mul((const(c),) + rest.args))
        else:
            parts.append(_make_mul((const(c), rest)))
    if not parts:
        return ZERO
    if len(parts) == 1:
        return parts[0]
    args = tuple(parts)
    return _intern(Add, None, args, _free_of(args), (5, None, tuple(a.sort_key for a in args)))


def mul(*factors: ExprLike) -> Expr:
    flat: list[Expr] = []
    for f in factors:
        f = as_expr(f)
        if isinstance(f, Mul):
            flat.extend(f.args)
        else:
            flat.append(f)
    coeff = 1.0
    exps: dict[Expr, int] = {}
    for f in flat:
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Pow):
            exps[f.base] = exps.get(f.base, 0) + f.exp
        else:
            exps[f] = exps.get(f, 0) + 1
    if coeff == 0.0:
        return ZERO
    if not math.isfinite(coeff):
        raise DomainError("constant overflow while multiplying")
    items = sorted(((b, e) for b, e in exps.items() if e != 0), key=lambda be: be[0].sort_key)
    parts = [b if e == 1 else _make_pow(b, e) for b, e in items]
    if not parts:
        return const(coeff)
    if coeff != 1.0:
        parts.insert(0, const(coeff))
    return _make_mul(tuple(parts))


def power(base: ExprLike, n: int) -> Expr:
    base = as_expr(base)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0.0 and n < 0:
            raise DomainError("zero raised to a negative power")
        try:
            return const(base.value**n)
        except OverflowError as exc:
            raise DomainError(str(exc)) from exc
    if isinstance(base, Pow):
        return power(base.base, base.exp * n)
    if isinstance(base, Mul):
        return mul(*(power(f, n) for f in base.args))
    return _make_pow(base, n)


def _numeric_func(name: str, kappa, x: float) -> float:
    from .._kernels import scalar_func

    return scalar_func(name, kappa, x)


def func(name: str, arg: ExprLike, kappa: float | None = None) -> Expr:
    arg = as_expr(arg)
    if name in TAGGED_FUNCS:
        if kappa is None:
            raise ValueError(f"tagged function {name} needs a kappa")
        kappa = float(kappa)
        if kappa == 0.0:
            kappa = 0.0
            # S_0(x)=x, C_0=1, T_0=x, CT_0=1/x
            return {"S": arg, "C": ONE, "T": arg}.get(name) or power(arg, -1)
    elif name in PLAIN_FUNCS:
        kappa = None
    else:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        value = _numeric_func(name, kappa, arg.value)
        if not math.isfinite(value):
            raise DomainError(f"{name}({arg.value}) is outside the real domain")
        return const(value)
    payload = (name, kappa)
    return _intern(Func, payload, (arg,), arg.free, (2, (name, -1.0 if kappa is None else kappa), (arg.sort_key,)))


def sin(x: ExprLike) -> Expr:
    return func("sin", x)


def cos(x: ExprLike) -> Expr:
    return func("cos", x)


def sinh(x: ExprLike) -> Expr:
    return func("sinh", x)


def cosh(x: ExprLike) -> Expr:
    return func("cosh", x)


def exp(x: ExprLike) -> Expr:
    return func("exp", x)


def sqrt(x: ExprLike) -> Expr:
    return func("sqrt", x)


def tan(x: ExprLike) -> Expr:
    return sin(x) / cos(x)


def tanh(x: ExprLike) -> Expr:
    return sinh(x) / cosh(x)


def S(kappa: float, x: ExprLike) -> Expr:
    """Tagged sine: sin(sqrt(k)x)/sqrt(k), x, or sinh(sqrt(-k)x)/sqrt(-k)."""
    return func("S", x, kappa)


def C(kappa: float, x: ExprLike) -> Expr:
    """Tagged cosine: cos(sqrt(k)x), 1, or cosh(sqrt(-k)x)."""
    return func("C", x, kappa)


def T(kappa: float, x: ExprLike) -> Expr:
    return func("T", x, kappa)


def CT(kappa: float, x: ExprLike) -> Expr:
    return func("CT", x, kappa)


def symbols(names: str, kind: VarKind = VarKind.COORDINATE) -> tuple[Var, ...]:
    """Quick constructor: ``x, y = symbols("x y")``."""
    return tuple(var(Variable(n, kind, i)) for i, n in enumerate(names.split(), start=1))


def free_variables(e: Expr) -> frozenset:
    return e.free


def iter_nodes(e: Expr):
    """Post-order traversal visiting each shared node once."""
    seen = set()
    stack = [(e, False)]
    while stack:
        node, done = stack.pop()
        if done:
            yield node
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))


def count_nodes(e: Expr) -> int:
    return sum(1 for _ in iter_nodes(e))


def substitute(e: Expr, mapping: dict) -> Expr:
    """Replace variables (keys: Variable or Var) by expressions."""
    table = {}
    for k, v in mapping.items():
        table[k.var if isinstance(k, Var) else k] = as_expr(v)
    if not table or not (e.free & set(table)):
        return e
    memo: dict[int, Expr] = {}
    for node in iter_nodes(e):
        if not (node.free & set(table)):
            out = node
        elif isinstance(node, Var):
            out = table[node.var]
        else:
            new_args = [memo[id(a)] for a in node.args]
            out = rebuild(node, new_args)
        memo[id(node)] = out
    return memo[id(e)]


def rebuild(node: Expr, new_args: list) -> Expr:
    if isinstance(node, Add):
        return add(*new_args)
    if isinstance(node, Mul):
        return mul(*new_args)
    if isinstance(node, Pow):
        return power(new_args[0], node.exp)
    if isinstance(node, Func):
        return func(node.name, new_args[0], node.kappa)
    return node
