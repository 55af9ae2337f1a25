"""Numeric evaluation: compilation to kernel programs, sampling boxes, zero tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .. import _kernels
from .._kernels import OPCODES
from .nodes import (
    Add,
    Const,
    DomainError,
    Expr,
    Func,
    Mul,
    Pow,
    UnboundVariableError,
    Var,
    Variable,
    as_expr,
    iter_nodes,
)

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Program:
    """Straight-line (SSA) program computing several expressions at once."""

    op: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    outputs: np.ndarray
    variables: tuple

    def __len__(self) -> int:
        return len(self.op)

    def run(self, X: np.ndarray, backend=None):
        k = _kernels.get_backend(backend)
        return k.eval_batch(self.op, self.a, self.b, self.c, self.outputs, np.ascontiguousarray(X, dtype=np.float64))


def compile_exprs(exprs: Sequence[Expr], variables: Sequence[Variable]) -> Program:
    """Lower expressions to a shared SSA program over ``variables`` (column order)."""
    exprs = [as_expr(e) for e in exprs]
    col = {v: i for i, v in enumerate(variables)}
    op: list[int] = []
    a: list[int] = []
    b: list[int] = []
    c: list[float] = []
    reg: dict[int, int] = {}
    consts: dict[float, int] = {}

    def emit(o, x=0, y=0, k=0.0):
        op.append(o)
        a.append(x)
        b.append(y)
        c.append(k)
        return len(op) - 1

    def emit_const(v):
        if v not in consts:
            consts[v] = emit(OPCODES["const"], k=v)
        return consts[v]

    def chain(o, regs):
        r = regs[0]
        for s in regs[1:]:
            r = emit(o, r, s)
        return r

    for root in exprs:
        for node in iter_nodes(root):
            if id(node) in reg:
                continue
            if isinstance(node, Const):
                r = emit_const(node.value)
            elif isinstance(node, Var):
                if node.var not in col:
                    raise UnboundVariableError(node.var.name)
                r = emit(OPCODES["var"], col[node.var])
            elif isinstance(node, Add):
                r = chain(OPCODES["add"], [reg[id(t)] for t in node.args])
            elif isinstance(node, Mul):
                num = [reg[id(f)] for f in node.args]
                r = chain(OPCODES["mul"], num)
            elif isinstance(node, Pow):
                base = reg[id(node.base)]
                if node.exp == -1:
                    r = emit(OPCODES["div"], emit_const(1.0), base)
                elif node.exp < 0:
                    r = emit(OPCODES["div"], emit_const(1.0), emit(OPCODES["powi"], base, 0, float(-node.exp)))
                elif node.exp == 2:
                    r = emit(OPCODES["mul"], base, base)
                else:
                    r = emit(OPCODES["powi"], base, 0, float(node.exp))
            elif isinstance(node, Func):
                x = reg[id(node.arg)]
                if node.name in ("S", "C"):
                    r = emit(OPCODES[node.name], x, 0, node.kappa)
                elif node.name in ("T", "CT"):
                    s = emit(OPCODES["S"], x, 0, node.kappa)
                    co = emit(OPCODES["C"], x, 0, node.kappa)
                    r = emit(OPCODES["div"], s, co) if node.name == "T" else emit(OPCODES["div"], co, s)
                else:
                    r = emit(OPCODES[node.name], x)
            else:
                raise TypeError(type(node).__name__)
            reg[id(node)] = r
    outs = [reg[id(e)] for e in exprs]
    return Program(
        np.asarray(op, dtype=np.int32),
        np.asarray(a, dtype=np.int32),
        np.asarray(b, dtype=np.int32),
        np.asarray(c, dtype=np.float64),
        np.asarray(outs, dtype=np.int32),
        tuple(variables),
    )


def sorted_variables(vs: Iterable[Variable]) -> tuple[Variable, ...]:
    from .nodes import var

    return tuple(sorted(set(vs), key=lambda v: var(v).sort_key))


@lru_cache(maxsize=1024)
def _cached_program(exprs: tuple, variables: tuple) -> Program:
    return compile_exprs(exprs, variables)


def _lookup(assignment: Mapping, v: Variable):
    if v in assignment:
        return assignment[v]
    if v.name in assignment:
        return assignment[v.name]
    raise UnboundVariableError(v.name)


def evaluate(e: Expr, assignment: Mapping) -> float:
    """Evaluate at one point; keys may be Variables or their names."""
    e = as_expr(e)
    variables = sorted_variables(e.free)
    x = np.array([[float(_lookup(assignment, v)) for v in variables]]).reshape(1, len(variables))
    vals, _, ok = _cached_program((e,), variables).run(x)
    if not ok[0]:
        raise DomainError(f"evaluation failed at {dict((v.name, float(xi)) for v, xi in zip(variables, x[0]))}")
    return float(vals[0, 0])


def evaluate_many(exprs: Sequence[Expr], variables: Sequence[Variable], X: np.ndarray):
    """Vectorised evaluation; returns ``(values[npts, nexpr], scale[npts], ok[npts])``."""
    prog = _cached_program(tuple(as_expr(e) for e in exprs), tuple(variables))
    vals, scale, ok = prog.run(np.atleast_2d(X))
    return vals, scale, ok.astype(bool)


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling region: one open interval per variable."""

    bounds: Mapping[Variable, tuple[float, float]]
    excluded: tuple = field(default=())  # (variable, centre, half_width) bands to skip

    @property
    def variables(self) -> tuple[Variable, ...]:
        return sorted_variables(self.bounds)

    def __or__(self, other: "Box") -> "Box":
        merged = dict(self.bounds)
        merged.update(other.bounds)
        return Box(merged, tuple(self.excluded) + tuple(other.excluded))

    def restrict(self, variables: Iterable[Variable]) -> "Box":
        vs = set(variables)
        return Box({v: r for v, r in self.bounds.items() if v in vs},
                   tuple(x for x in self.excluded if x[0] in vs))

    def with_bounds(self, **by_name) -> "Box":
        merged = dict(self.bounds)
        for v in list(merged):
            if v.name in by_name:
                merged[v] = by_name[v.name]
        return Box(merged, self.excluded)

    def sample_random(self, n: int, seed: int = 0) -> np.ndarray:
        """Seeded pseudo-random points; use where generic position matters more than coverage."""
        vs = self.variables
        rng = np.random.default_rng(seed)
        lo = np.array([self.bounds[v][0] for v in vs], dtype=float)
        hi = np.array([self.bounds[v][1] for v in vs], dtype=float)
        out = np.empty((0, len(vs)))
        while len(out) < n:
            pts = lo + (hi - lo) * rng.random((2 * n + 4, len(vs)))
            keep = np.ones(len(pts), dtype=bool)
            for v, centre, half in self.excluded:
                keep &= np.abs(pts[:, vs.index(v)] - centre) > half
            out = np.concatenate([out, pts[keep]])
        return out[:n]

    def sample(self, n: int, seed: int = 0, skip: int = 0) -> np.ndarray:
        """``n`` scrambled-Halton points (rows) in ``variables`` order, honouring exclusions."""
        vs = self.variables
        if not vs:
            return np.zeros((n, 0))
        lo = np.array([self.bounds[v][0] for v in vs], dtype=float)
        hi = np.array([self.bounds[v][1] for v in vs], dtype=float)
        eng = qmc.Halton(d=len(vs), scramble=True, seed=seed)
        if skip:
            eng.fast_forward(skip)
        out = []
        got = 0
        while got < n:
            pts = qmc.scale(eng.random(2 * (n - got) + 4), lo, hi)
            keep = np.ones(len(pts), dtype=bool)
            for v, centre, half in self.excluded:
                j = vs.index(v)
                keep &= np.abs(pts[:, j] - centre) > half
            pts = pts[keep]
            out.append(pts)
            got += len(pts)
        return np.concatenate(out)[:n]


@dataclass(frozen=True)
class ZeroTestResult:
    is_zero: bool
    max_residual: float
    samples: int
    tol: float
    worst_point: dict | None = None

    def __bool__(self) -> bool:
        return self.is_zero


def sample_valid(exprs: Sequence[Expr], box: Box, samples: int, seed: int = 0, max_rounds: int = 8):
    """Sample points where every expression evaluates; returns (X, values, scale)."""
    exprs = [as_expr(e) for e in exprs]
    free = set().union(*(e.free for e in exprs)) if exprs else set()
    missing = free - set(box.bounds)
    if missing:
        raise UnboundVariableError(", ".join(sorted(v.name for v in missing)))
    variables = box.variables
    Xs, Vs, Ss = [], [], []
    got = 0
    skip = 0
    for _ in range(max_rounds):
        need = samples - got
        X = box.sample(need, seed=seed, skip=skip)
        skip += 4 * need + 8
        vals, scale, ok = evaluate_many(exprs, variables, X)
        Xs.append(X[ok])
        Vs.append(vals[ok])
        Ss.append(scale[ok])
        got += int(ok.sum())
        if got >= samples:
            break
    if got < samples:
        raise DomainError(f"only {got}/{samples} sample points were inside the domain")
    return (np.concatenate(Xs)[:samples], np.concatenate(Vs)[:samples], np.concatenate(Ss)[:samples])


def numeric_zero_test(e, box: Box, samples: int = 50, tol: float = DEFAULT_TOL, seed: int = 0) -> ZeroTestResult:
    """Probabilistic test that ``e`` (or every entry of an iterable of expressions) vanishes on ``box``.

    A point passes when ``|e| <= tol * (1 + s)`` with ``s`` the largest
    magnitude of any intermediate value met while evaluating ``e`` there.
    The reported residual is ``max |e| / (1 + s)``.
    """
    exprs = _flatten(e)
    if not exprs:
        return ZeroTestResult(True, 0.0, 0, tol)
    X, vals, scale = sample_valid(exprs, box, samples, seed=seed)
    scaled = np.abs(vals) / (1.0 + scale)[:, None]
    flat_idx = int(np.argmax(scaled))
    row = flat_idx // scaled.shape[1]
    worst = float(scaled.flat[flat_idx])
    point = {v.name: float(x) for v, x in zip(box.variables, X[row])}
    return ZeroTestResult(worst <= tol, worst, samples, tol, point)


def _flatten(e) -> list[Expr]:
    if isinstance(e, (Expr, int, float)):
        return [as_expr(e)]
    out = []
    for item in e:
        out.extend(_flatten(item))
    return out


def central_difference(e: Expr, v: Variable, point: Mapping, step: float = 1e-6) -> float:
    """Independent oracle: scaled central difference of ``e`` along ``v`` at ``point``."""
    pt = {(k if isinstance(k, Variable) else k): float(val) for k, val in point.items()}
    key = v if v in pt else v.name
    x0 = pt[key]
    h = step * max(1.0, abs(x0))
    up = dict(pt)
    dn = dict(pt)
    up[key] = x0 + h
    dn[key] = x0 - h
    return (evaluate(e, up) - evaluate(e, dn)) / (2 * h)
