"""Coordinate charts, metrics, and curvature.

Conventions
-----------
Christoffel symbols are the Levi-Civita ones,
``Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)``, stored as
``gamma[k][i][j]``.  The Riemann tensor uses

    R^k_lij = d_i Gamma^k_jl - d_j Gamma^k_il + Gamma^h_jl Gamma^k_ih - Gamma^h_il Gamma^k_jh

stored as ``R[k][l][i][j]``; with it a space of constant curvature K satisfies
``R_hlij = K (g_jl g_hi - g_il g_hj)`` (sphere: K = +1).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np

from .symexpr import (
    ONE,
    ZERO,
    Box,
    Expr,
    ExpressionError,
    Variable,
    VarKind,
    add,
    as_expr,
    diff,
    mul,
    power,
    sample_valid,
    var,
)

Matrix = list  # list[list[Expr]]


class GeometryError(ExpressionError):
    pass


class SingularMetricError(GeometryError):
    pass


@dataclass(frozen=True)
class Chart:
    """Coordinates q^1..q^n with conjugate momenta p_1..p_n and a safe sampling box."""

    coordinates: tuple[Variable, ...]
    momenta: tuple[Variable, ...]
    bounds: tuple[tuple[float, float], ...]
    excluded: tuple = ()  # (coordinate index, centre, half width)

    def __post_init__(self):
        if len(self.coordinates) < 1:
            raise GeometryError("a chart needs at least one coordinate")
        if not (len(self.coordinates) == len(self.momenta) == len(self.bounds)):
            raise GeometryError("coordinates, momenta and bounds must have equal length")
        names = [v.name for v in self.coordinates + self.momenta]
        if len(set(names)) != len(names):
            raise GeometryError(f"duplicate variable names in chart: {names}")

    @classmethod
    def make(cls, names: Sequence[str], bounds, excluded=(), momentum_prefix: str = "p"):
        qs = tuple(Variable(n, VarKind.COORDINATE, i) for i, n in enumerate(names, start=1))
        ps = tuple(Variable(f"{momentum_prefix}{i}", VarKind.MOMENTUM, i) for i in range(1, len(names) + 1))
        return cls(qs, ps, tuple(tuple(map(float, b)) for b in bounds), tuple(excluded))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    @property
    def q(self) -> tuple[Expr, ...]:
        return tuple(var(v) for v in self.coordinates)

    @property
    def p(self) -> tuple[Expr, ...]:
        return tuple(var(v) for v in self.momenta)

    def variables(self) -> dict[str, Variable]:
        return {v.name: v for v in self.coordinates + self.momenta}

    def coordinate_box(self) -> Box:
        ex = tuple((self.coordinates[i], c, h) for i, c, h in self.excluded)
        return Box(dict(zip(self.coordinates, self.bounds)), ex)

    def phase_box(self, momentum_range: float = 1.0) -> Box:
        b = self.coordinate_box()
        return b | Box({p: (-momentum_range, momentum_range) for p in self.momenta})


class Metric:
    """Inverse metric components ``g^ij`` on a chart, with lazily derived tensors."""

    def __init__(self, chart: Chart, inverse: Sequence[Sequence], signature: str = "riemannian"):
        n = chart.dimension
        inv = [[as_expr(inverse[i][j]) for j in range(n)] for i in range(n)]
        if len(inverse) != n or any(len(r) != n for r in inverse):
            raise GeometryError("inverse metric must be n x n")
        for i in range(n):
            for j in range(i + 1, n):
                if inv[i][j] is not inv[j][i]:
                    raise GeometryError(f"g^{i}{j} and g^{j}{i} differ; the metric must be symmetric")
        coords = set(chart.coordinates)
        for row in inv:
            for e in row:
                if not e.free <= coords:
                    raise GeometryError("metric components may depend on coordinates only")
        self.chart = chart
        self.inverse = inv
        self.signature = signature

    @property
    def n(self) -> int:
        return self.chart.dimension

    @property
    def is_diagonal(self) -> bool:
        return all(self.inverse[i][j] is ZERO for i in range(self.n) for j in range(self.n) if i != j)

    @cached_property
    def lower(self) -> Matrix:
        return _invert(self.inverse)

    @cached_property
    def christoffel(self) -> list:
        n, g, ginv, q = self.n, self.lower, self.inverse, self.chart.coordinates
        dg = [[[diff(g[a][b], q[c]) for c in range(n)] for b in range(n)] for a in range(n)]
        out = [[[ZERO] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    terms = []
                    for l in range(n):
                        if ginv[k][l] is ZERO:
                            continue
                        s = add(dg[l][j][i], dg[l][i][j], mul(-1, dg[i][j][l]))
                        if s is not ZERO:
                            terms.append(mul(0.5, ginv[k][l], s))
                    out[k][i][j] = out[k][j][i] = add(*terms)
        return out

    @cached_property
    def riemann(self) -> list:
        n, G, q = self.n, self.christoffel, self.chart.coordinates
        R = [[[[ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for k, l, i, j in product(range(n), repeat=4):
            if i == j:
                continue
            if j < i:
                R[k][l][i][j] = mul(-1, R[k][l][j][i])
                continue
            terms = [diff(G[k][j][l], q[i]), mul(-1, diff(G[k][i][l], q[j]))]
            for h in range(n):
                terms.append(mul(G[h][j][l], G[k][i][h]))
                terms.append(mul(-1, G[h][i][l], G[k][j][h]))
            R[k][l][i][j] = add(*terms)
        return R

    @cached_property
    def riemann_lowered(self) -> list:
        n, g, R = self.n, self.lower, self.riemann
        out = [[[[ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for h, l, i, j in product(range(n), repeat=4):
            out[h][l][i][j] = add(*(mul(g[h][k], R[k][l][i][j]) for k in range(n) if g[h][k] is not ZERO))
        return out

    def constant_curvature_form(self, h, l, i, j) -> Expr:
        g = self.lower
        return add(mul(g[j][l], g[h][i]), mul(-1, g[i][l], g[h][j]))

    def kinetic(self, momenta: Sequence[Expr] | None = None) -> Expr:
        """``1/2 g^ij p_i p_j``."""
        p = momenta if momenta is not None else self.chart.p
        terms = []
        for i in range(self.n):
            for j in range(self.n):
                if self.inverse[i][j] is not ZERO:
                    terms.append(mul(0.5, self.inverse[i][j], p[i], p[j]))
        return add(*terms)


def _det(M: Matrix) -> Expr:
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return add(mul(M[0][0], M[1][1]), mul(-1, M[0][1], M[1][0]))
    terms = []
    for j in range(n):
        if M[0][j] is ZERO:
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        terms.append(mul((-1) ** j, M[0][j], _det(minor)))
    return add(*terms)


def _invert(M: Matrix) -> Matrix:
    n = len(M)
    if all(M[i][j] is ZERO for i in range(n) for j in range(n) if i != j):
        if any(M[i][i] is ZERO for i in range(n)):
            raise SingularMetricError("zero diagonal entry")
        return [[power(M[i][i], -1) if i == j else ZERO for j in range(n)] for i in range(n)]
    det = _det(M)
    if det is ZERO:
        raise SingularMetricError("determinant is identically zero")
    inv_det = power(det, -1)
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1 :] for k, row in enumerate(M) if k != j]
            cof = _det(minor) if minor else ONE
            out[i][j] = mul((-1) ** (i + j), cof, inv_det)
    return out


def lower_metric(M: Metric) -> Matrix:
    return M.lower


def christoffel(M: Metric) -> list:
    return M.christoffel


def riemann(M: Metric) -> list:
    return M.riemann


def determinant(M: Matrix) -> Expr:
    return _det(M)


def _require_coordinate_only(G: Expr, M: Metric):
    G = as_expr(G)
    if G.has_momenta:
        raise GeometryError("G must not depend on momenta")
    extra = G.free - set(M.chart.coordinates)
    if extra:
        raise GeometryError(f"G depends on variables outside the chart: {sorted(v.name for v in extra)}")
    return G


def covariant_hessian(G: Expr, M: Metric) -> Matrix:
    """``H(G)_ij = d_i d_j G - Gamma^k_ij d_k G``."""
    G = _require_coordinate_only(G, M)
    q, n, Gam = M.chart.coordinates, M.n, M.christoffel
    grad = [diff(G, qi) for qi in q]
    H = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            terms = [diff(grad[i], q[j])]
            terms += [mul(-1, Gam[k][i][j], grad[k]) for k in range(n) if Gam[k][i][j] is not ZERO]
            H[i][j] = H[j][i] = add(*terms)
    return H


def laplace_beltrami(G: Expr, M: Metric) -> Expr:
    """Divergence form ``|g|^(-1/2) d_i (|g|^(1/2) g^ij d_j G)``.

    Written via ``d_i log|g|^(1/2) = -1/2 d_i det(g^..) / det(g^..)`` so it needs
    neither Christoffel symbols nor square roots.
    """
    G = _require_coordinate_only(G, M)
    q, n, ginv = M.chart.coordinates, M.n, M.inverse
    grad = [diff(G, qi) for qi in q]
    flux = [add(*(mul(ginv[i][j], grad[j]) for j in range(n))) for i in range(n)]
    dinv = _det(ginv)
    terms = []
    for i in range(n):
        terms.append(diff(flux[i], q[i]))
        ddet = diff(dinv, q[i])
        if ddet is not ZERO:
            terms.append(mul(-0.5, ddet, power(dinv, -1), flux[i]))
    return add(*terms)


def trace(M: Metric, H: Matrix) -> Expr:
    n = M.n
    return add(*(mul(M.inverse[i][j], H[i][j]) for i in range(n) for j in range(n)))


def metric_compatibility(M: Metric) -> list[Expr]:
    """Components of ``nabla_k g_ij`` (all should vanish)."""
    n, g, G, q = M.n, M.lower, M.christoffel, M.chart.coordinates
    out = []
    for k, i, j in product(range(n), repeat=3):
        terms = [diff(g[i][j], q[k])]
        for l in range(n):
            terms.append(mul(-1, G[l][k][i], g[l][j]))
            terms.append(mul(-1, G[l][k][j], g[i][l]))
        out.append(add(*terms))
    return out


def riemann_antisymmetry(M: Metric) -> list[Expr]:
    n, R = M.n, M.riemann
    return [add(R[k][l][i][j], R[k][l][j][i]) for k, l, i, j in product(range(n), repeat=4)]


def first_bianchi(M: Metric) -> list[Expr]:
    """``R^k_lij + R^k_ijl + R^k_jli`` for every index choice."""
    n, R = M.n, M.riemann
    return [add(R[k][l][i][j], R[k][i][j][l], R[k][j][l][i]) for k, l, i, j in product(range(n), repeat=4)]


def inverse_check(M: Metric) -> list[Expr]:
    """``g_ik g^kj - delta_i^j``."""
    n = M.n
    out = []
    for i in range(n):
        for j in range(n):
            s = add(*(mul(M.lower[i][k], M.inverse[k][j]) for k in range(n)))
            out.append(add(s, -1.0 if i == j else 0.0))
    return out


@dataclass(frozen=True)
class CurvatureClassification:
    constant: bool
    K: float | None
    max_residual: float
    samples: int
    degenerate: bool = False  # every curvature denominator vanished (n = 1)
    fitted_K: float | None = None

    @property
    def verdict(self) -> str:
        if self.degenerate:
            return "constant (any K, one-dimensional)"
        return f"constant K={self.K:.12g}" if self.constant else "non-constant"


def classify_curvature(M: Metric, samples: int = 50, tol: float = 1e-9, seed: int = 0,
                       box: Box | None = None) -> CurvatureClassification:
    """Fit K from ``R_hlij / (g_jl g_hi - g_il g_hj)`` and check the residual.

    K is the mean ratio over sample points and index tuples with a
    non-negligible denominator; the residual is
    ``max |R_hlij - K D_hlij| / (1 + |R_hlij| + |K D_hlij|)``.
    """
    n = M.n
    box = box or M.chart.coordinate_box()
    idx = [(h, l, i, j) for h, l, i, j in product(range(n), repeat=4) if i < j and h < l]
    if not idx:
        return CurvatureClassification(True, 0.0, 0.0, 0, degenerate=True)
    Rl = M.riemann_lowered
    exprs = []
    for h, l, i, j in idx:
        exprs.append(Rl[h][l][i][j])
        exprs.append(M.constant_curvature_form(h, l, i, j))
    _, vals, _ = sample_valid(exprs, box, samples, seed=seed)
    R = vals[:, 0::2]
    D = vals[:, 1::2]
    mask = np.abs(D) > 1e-8 * max(1.0, float(np.max(np.abs(D))))
    if not mask.any():
        # curvature form vanishes everywhere sampled; only K=0 can be tested
        resid = float(np.max(np.abs(R) / (1 + np.abs(R))))
        return CurvatureClassification(resid <= tol, 0.0 if resid <= tol else None, resid, samples, degenerate=True)
    K = float(np.mean(R[mask] / D[mask]))
    resid = float(np.max(np.abs(R - K * D) / (1.0 + np.abs(R) + np.abs(K * D))))
    ok = resid <= tol
    return CurvatureClassification(ok, K if ok else None, resid, samples, fitted_K=K)
