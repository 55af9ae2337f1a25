"""Structure equations for G and V, and the built-in solution bases.

The Hessian equation is taken in the form ``H(G)_ij = -m c G g_ij`` and the
potential condition as ``g^ij d_i V d_j G = 2 m (c V + L0) G``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import GeometryError, Metric, covariant_hessian, laplace_beltrami
from .models import Model, get_model
from .symexpr import (
    Box,
    Expr,
    ExpressionError,
    add,
    as_expr,
    diff,
    evaluate_many,
    mul,
    numeric_zero_test,
    sample_valid,
)


class CurvatureMismatchError(ValueError):
    """``m * c`` differs from the curvature of the base manifold."""


class IncompatiblePotentialError(ValueError):
    def __init__(self, message: str, fitted_L0: float, residual: float):
        super().__init__(message)
        self.fitted_L0 = fitted_L0
        self.residual = residual


def hess_residual(G: Expr, M: Metric, m: int, c: float) -> list[list[Expr]]:
    """``H(G)_ij + m c G g_ij``; vanishes iff G solves the Hessian equation."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    G = as_expr(G)
    H = covariant_hessian(G, M)
    g = M.lower
    n = M.n
    return [[add(H[i][j], mul(m * c, G, g[i][j])) for j in range(n)] for i in range(n)]


def v_residual(V: Expr, G: Expr, M: Metric, m: int, c: float, L0: float) -> Expr:
    """``g^ij d_i V d_j G - 2 m (c V + L0) G``."""
    V, G = as_expr(V), as_expr(G)
    for name, e in (("V", V), ("G", G)):
        if e.has_momenta:
            raise GeometryError(f"{name} must depend on coordinates only")
    q = M.chart.coordinates
    dV = [diff(V, x) for x in q]
    dG = [diff(G, x) for x in q]
    n = M.n
    dot = add(*(mul(M.inverse[i][j], dV[i], dG[j]) for i in range(n) for j in range(n)))
    return add(dot, mul(-2 * m, add(mul(c, V), L0), G))


@dataclass(frozen=True)
class GBasis:
    model: str
    elements: tuple[Expr, ...]
    m: int
    c: float
    labels: tuple[str, ...] = ()

    @property
    def parameters(self) -> tuple[str, ...]:
        return tuple(f"a{i}" for i in range(1, len(self.elements) + 1))

    def combine(self, coefficients: Sequence[float]) -> Expr:
        if len(coefficients) != len(self.elements):
            raise ValueError(f"expected {len(self.elements)} coefficients, got {len(coefficients)}")
        return add(*(mul(float(a), g) for a, g in zip(coefficients, self.elements)))

    def __len__(self) -> int:
        return len(self.elements)


def builtin_gbasis(model: str | Model, m: int, c: float, tol: float = 1e-9) -> GBasis:
    """Closed-form ``n+1`` solutions of the Hessian equation on a registry model.

    Raises :class:`CurvatureMismatchError` unless ``m c`` equals the model
    curvature (one-dimensional models accept any ``m c``).
    """
    mdl = model if isinstance(model, Model) else get_model(model)
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    if mdl.basis is None:
        raise ExpressionError(f"model {mdl.key} ships no closed-form basis")
    mc = m * c
    if mdl.K is not None and abs(mc - mdl.K) > tol:
        raise CurvatureMismatchError(f"m*c = {mc:g} but {mdl.key} has constant curvature K = {mdl.K:g}")
    return GBasis(mdl.key, tuple(mdl.basis(mc)), int(m), float(c), mdl.basis_labels)


def gram_rank(basis: GBasis, box: Box, seed: int = 0, rcond: float = 1e-8) -> tuple[int, float]:
    """Rank and condition number of basis values at ``n+1`` generic points."""
    k = len(basis.elements)
    X = box.sample_random(k, seed=seed)
    vals, _, ok = evaluate_many(list(basis.elements), box.variables, X)
    if not ok.all():
        raise ExpressionError("basis evaluation failed at a sample point")
    s = np.linalg.svd(vals, compute_uv=False)
    rank = int(np.sum(s > rcond * s[0]))
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    return rank, cond


def eigen_residual(G: Expr, M: Metric, m: int, c: float) -> Expr:
    """``Delta G + n m c G`` (the Laplace-Beltrami eigenfunction property)."""
    return add(laplace_beltrami(G, M), mul(M.n * m * c, G))


@dataclass(frozen=True)
class PotentialSpec:
    V: Expr
    L0: float
    G: Expr


def check_e10_form(V: Expr, G: Expr, M: Metric, m: int, c: float, box: Box | None = None,
                   samples: int = 40, tol: float = 1e-9, seed: int = 0) -> tuple[float, float]:
    """Least-squares fit of L0 in ``grad V . grad G - 2mcVG = 2 m L0 G``.

    Points where ``|G|`` is tiny relative to its sampled maximum are dropped
    before the fit.  Returns ``(L0, max scaled residual)`` and raises
    :class:`IncompatiblePotentialError` when the residual exceeds ``tol``.
    """
    box = box or M.chart.coordinate_box()
    lhs = v_residual(V, G, M, m, c, 0.0)  # = grad V.grad G - 2mcVG
    rhs_unit = mul(2 * m, G)
    _, vals, scale = sample_valid([lhs, rhs_unit], box, max(samples, 20), seed=seed)
    y, x = vals[:, 0], vals[:, 1]
    keep = np.abs(x) > 1e-6 * max(1.0, float(np.max(np.abs(x))))
    if keep.sum() < 3:
        raise IncompatiblePotentialError("G vanishes on the sample box; L0 cannot be fitted", float("nan"), float("inf"))
    L0 = float(np.dot(x[keep], y[keep]) / np.dot(x[keep], x[keep]))
    if abs(L0) < 1e-12:
        L0 = 0.0
    resid = float(np.max(np.abs(y - L0 * x) / (1.0 + scale)))
    if resid > tol:
        raise IncompatiblePotentialError(
            f"no constant L0 makes V compatible with G (best L0={L0:.6g}, residual={resid:.3g})", L0, resid
        )
    return L0, resid


def potential_spec(model: Model, name: str, m: int, c: float, L0: float, a: Sequence[float]) -> PotentialSpec:
    """Instantiate a registry potential for coefficients ``a``."""
    recipe = model.potentials.get(name)
    if recipe is None:
        raise KeyError(f"model {model.key} has no potential {name!r}; known: {', '.join(model.potentials)}")
    basis = builtin_gbasis(model, m, c)
    G = basis.combine(a)
    return PotentialSpec(recipe(model, m, c, L0, a), float(L0), G)


def matrix_zero_test(mat, box: Box, samples: int = 50, tol: float = 1e-9, seed: int = 0):
    return numeric_zero_test([e for row in mat for e in row], box, samples=samples, tol=tol, seed=seed)
