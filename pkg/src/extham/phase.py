"""Canonical phase spaces and Poisson brackets.

Bracket convention: ``{A, B} = sum_i dA/dq^i dB/dp_i - dA/dp_i dB/dq^i``, so the
Hamiltonian vector field of ``H`` acts as ``X_H(F) = {F, H}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geometry import Chart
from .symexpr import Expr, ExpressionError, Variable, VarKind, add, as_expr, diff, evaluate, mul, var

U_VAR = Variable("u", VarKind.EXT_COORDINATE, 0)
PU_VAR = Variable("p_u", VarKind.EXT_MOMENTUM, 0)
u = var(U_VAR)
p_u = var(PU_VAR)


class PhaseSpaceMismatch(ExpressionError):
    pass


@dataclass(frozen=True)
class PhaseSpace:
    """Ordered canonical pairs ``(q^i, p_i)``."""

    pairs: tuple[tuple[Variable, Variable], ...]

    @classmethod
    def of_chart(cls, chart: Chart, extended: bool = False) -> "PhaseSpace":
        pairs = tuple(zip(chart.coordinates, chart.momenta))
        if extended:
            pairs = ((U_VAR, PU_VAR),) + pairs
        return cls(pairs)

    @property
    def coordinates(self) -> tuple[Variable, ...]:
        return tuple(q for q, _ in self.pairs)

    @property
    def momenta(self) -> tuple[Variable, ...]:
        return tuple(p for _, p in self.pairs)

    @property
    def state_variables(self) -> tuple[Variable, ...]:
        """State-vector order used by trajectories: all coordinates then all momenta."""
        return self.coordinates + self.momenta

    @property
    def dimension(self) -> int:
        return 2 * len(self.pairs)

    def contains(self, e: Expr) -> bool:
        return as_expr(e).free <= set(self.state_variables)

    def check(self, *exprs: Expr):
        allowed = set(self.state_variables)
        for e in exprs:
            extra = as_expr(e).free - allowed
            if extra:
                raise PhaseSpaceMismatch(
                    f"expression uses {sorted(v.name for v in extra)} outside the phase space"
                )


def poisson_bracket(A: Expr, B: Expr, space: PhaseSpace) -> Expr:
    A, B = as_expr(A), as_expr(B)
    space.check(A, B)
    terms = []
    for q, p in space.pairs:
        terms.append(mul(diff(A, q), diff(B, p)))
        terms.append(mul(-1, diff(A, p), diff(B, q)))
    return add(*terms)


def fd_poisson_bracket(A: Expr, B: Expr, space: PhaseSpace, point: Mapping, step: float = 1e-5) -> float:
    """Finite-difference oracle for ``{A, B}`` at one point (independent of :func:`diff`)."""
    pt = {(k.name if isinstance(k, Variable) else k): float(v) for k, v in point.items()}

    def grad(e, v: Variable):
        x0 = pt[v.name]
        h = step * max(1.0, abs(x0))
        up, dn = dict(pt), dict(pt)
        up[v.name] = x0 + h
        dn[v.name] = x0 - h
        return (evaluate(e, up) - evaluate(e, dn)) / (2 * h)

    total = 0.0
    for q, p in space.pairs:
        total += grad(A, q) * grad(B, p) - grad(A, p) * grad(B, q)
    return total


def hamiltonian_vector_field(H: Expr, space: PhaseSpace) -> list[Expr]:
    """Right-hand side of Hamilton's equations in ``space.state_variables`` order."""
    qdot = [diff(H, p) for p in space.momenta]
    pdot = [mul(-1, diff(H, q)) for q in space.coordinates]
    return qdot + pdot


def jacobian_values(exprs: Sequence[Expr], space: PhaseSpace, X: np.ndarray) -> np.ndarray:
    """Jacobians ``d(exprs)/d(state)`` at rows of ``X``; shape ``(npts, nexpr, dim)``."""
    from .symexpr import evaluate_many

    sv = space.state_variables
    entries = [diff(as_expr(e), v) for e in exprs for v in sv]
    vals, _, ok = evaluate_many(entries, sv, X)
    J = vals.reshape(len(X), len(exprs), len(sv))
    J[~ok] = np.nan
    return J
