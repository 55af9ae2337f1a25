"""Extended Hamiltonians ``H = p_u^2/2 + alpha(u) L + f(u)`` and the operator ``U``.

``U = p_u + gamma(u) X_L`` with ``X_L(F) = {F, L}`` on the base phase space.
Powers of ``U`` are applied one step at a time, re-expanding into momentum
normal form after each step; the coefficients of ``U`` do not commute, so no
binomial shortcut is used.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import Chart, Metric
from .phase import PU_VAR, U_VAR, PhaseSpace, p_u, poisson_bracket, u
from .symexpr import (
    ZERO,
    Box,
    CT,
    Expr,
    S,
    add,
    as_expr,
    diff,
    expand_momenta,
    mul,
    power,
    to_polynomial,
)


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExtensionSpec:
    """Constants selecting ``gamma``, ``alpha`` and ``f``.

    ``c != 0``: ``gamma = CT_kappa(c u + u0)``.  ``c == 0``: ``gamma = -A (u + u0)``
    and the constant part of ``f`` may be given either as ``f0`` or as ``V0``
    (``f0 = m A V0``), not both.
    """

    m: int
    c: float
    kappa: float = 0.0
    u0: float = 0.0
    L0: float = 0.0
    f0: float = 0.0
    A: float = 1.0
    V0: float = 0.0
    u_range: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidSpecError(f"m must be a positive integer, got {self.m!r}")
        if self.c == 0.0:
            if self.A == 0.0:
                raise InvalidSpecError("the c = 0 branch needs A != 0 (alpha = m A would vanish)")
            if self.V0 != 0.0 and self.f0 != 0.0:
                raise InvalidSpecError("give either f0 or V0 in the c = 0 branch, not both")
        elif self.V0 != 0.0:
            raise InvalidSpecError("V0 belongs to the c = 0 branch; use f0 (or W0 via f0) for c != 0")
        lo, hi = self.u_range
        if not lo < hi:
            raise InvalidSpecError("u_range must be an increasing pair")

    @property
    def branch(self) -> str:
        return "c_zero" if self.c == 0.0 else "c_nonzero"

    @property
    def effective_f0(self) -> float:
        if self.c == 0.0 and self.V0 != 0.0:
            return self.m * self.A * self.V0
        return self.f0

    @property
    def B(self) -> float:
        return self.m * self.L0 * self.A**2

    @property
    def W0(self) -> float:
        return self.f0 - self.m * self.kappa * self.L0

    def check_curvature(self, K: float | None, tol: float = 1e-9):
        """``m c`` must equal the base curvature (skipped when ``K`` is None)."""
        if K is None:
            return
        if abs(self.m * self.c - K) > tol:
            from .structure import CurvatureMismatchError

            raise CurvatureMismatchError(f"m*c = {self.m * self.c:g} differs from the base curvature K = {K:g}")

    def u_argument(self) -> Expr:
        return add(mul(self.c, u), self.u0)


def build_gamma_alpha_f(spec: ExtensionSpec) -> tuple[Expr, Expr, Expr]:
    m, c = spec.m, spec.c
    if spec.branch == "c_nonzero":
        x = spec.u_argument()
        gamma = CT(spec.kappa, x)
        inv_s2 = power(S(spec.kappa, x), -2)
        alpha = mul(m * c, inv_s2)
        f = add(mul(m * spec.L0, inv_s2), spec.f0 - m * spec.kappa * spec.L0)
    else:
        shifted = add(u, spec.u0)
        gamma = mul(-spec.A, shifted)
        alpha = as_expr(m * spec.A)
        f = add(mul(m * spec.L0 * spec.A**2, power(shifted, 2)), spec.effective_f0)
    return gamma, alpha, f


def natural_hamiltonian(metric: Metric, V: Expr = ZERO) -> Expr:
    return add(metric.kinetic(), as_expr(V))


@dataclass(frozen=True)
class ExtendedModel:
    chart: Chart
    L: Expr
    spec: ExtensionSpec
    gamma: Expr
    alpha: Expr
    f: Expr
    H: Expr
    G: Expr | None = None
    F: Expr | None = None
    metric: Metric | None = None
    V: Expr | None = None
    key: str = ""
    base_box: Box | None = None
    momentum_range: float = 1.0
    phi: Expr | None = None  # extra term added to U (sabotage experiments only)
    extra_integrals: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def base_space(self) -> PhaseSpace:
        return PhaseSpace.of_chart(self.chart)

    @property
    def space(self) -> PhaseSpace:
        return PhaseSpace.of_chart(self.chart, extended=True)

    @property
    def momenta(self):
        return (PU_VAR,) + tuple(self.chart.momenta)

    @property
    def box(self) -> Box:
        """Safe sampling box on the extended phase space."""
        base = self.base_box or self.chart.coordinate_box()
        r = self.momentum_range
        ext = Box({U_VAR: self.spec.u_range, PU_VAR: (-r, r)})
        return base | Box({p: (-r, r) for p in self.chart.momenta}) | ext

    def X_L(self, F: Expr) -> Expr:
        # L is free of (u, p_u), so the extended bracket equals the base one
        return poisson_bracket(F, self.L, self.space)

    def X_H(self, F: Expr) -> Expr:
        return poisson_bracket(F, self.H, self.space)

    def U(self, F: Expr) -> Expr:
        return apply_U(F, self)

    def with_G(self, G: Expr, k: int | None = None) -> "ExtendedModel":
        G = as_expr(G)
        return replace(self, G=G, F=power_U(G, self, k))

    def with_gamma(self, gamma: Expr) -> "ExtendedModel":
        """Same H, different ``gamma`` in U (breaks the first-integral property)."""
        model = replace(self, gamma=as_expr(gamma), F=None)
        return model.with_G(self.G) if self.G is not None else model

    def with_phi(self, phi: Expr) -> "ExtendedModel":
        model = replace(self, phi=as_expr(phi), F=None)
        return model.with_G(self.G) if self.G is not None else model


def build_extended_hamiltonian(L: Expr, spec: ExtensionSpec, chart: Chart, **extra) -> ExtendedModel:
    """Assemble ``H = p_u^2/2 + alpha L + f`` over the base Hamiltonian ``L``."""
    L = as_expr(L)
    PhaseSpace.of_chart(chart).check(L)
    gamma, alpha, f = build_gamma_alpha_f(spec)
    H = add(mul(0.5, power(p_u, 2)), mul(alpha, L), f)
    return ExtendedModel(chart, L, spec, gamma, alpha, f, H, **extra)


def closed_form_hamiltonian(L: Expr, spec: ExtensionSpec) -> Expr:
    """The two displayed closed forms of H, written independently of alpha and f."""
    half_pu2 = mul(0.5, power(p_u, 2))
    if spec.branch == "c_nonzero":
        x = spec.u_argument()
        return add(half_pu2, mul(spec.m, add(mul(spec.c, L), spec.L0), power(S(spec.kappa, x), -2)), spec.W0)
    V0 = spec.V0 if spec.V0 != 0.0 else spec.f0 / (spec.m * spec.A)
    return add(half_pu2, mul(spec.m * spec.A, add(L, V0)), mul(spec.B, power(add(u, spec.u0), 2)))


def apply_U(F: Expr, model: ExtendedModel) -> Expr:
    """``U(F) = p_u F + gamma {F, L}`` (plus ``phi F`` if the model carries phi)."""
    F = as_expr(F)
    to_polynomial(F, model.momenta)  # raises NonPolynomialError
    out = add(mul(p_u, F), mul(model.gamma, model.X_L(F)))
    if model.phi is not None:
        out = add(out, mul(model.phi, F))
    return expand_momenta(out, model.momenta)


def power_U(G: Expr, model: ExtendedModel, k: int | None = None) -> Expr:
    """``U^k(G)`` with ``k`` defaulting to the model's ``m``."""
    G = as_expr(G)
    if G.has_momenta:
        raise ValueError("G must be a function of the base coordinates only")
    k = model.m if k is None else int(k)
    F = G
    for _ in range(k):
        F = apply_U(F, model)
    return F


# -- structural residuals -----------------------------------------------------

def structure_residuals(model: ExtendedModel) -> dict[str, Expr]:
    """Residual expressions of the conditions linking gamma, alpha and f."""
    s, g, a, f = model.spec, model.gamma, model.alpha, model.f
    dg = diff(g, U_VAR)
    out = {
        "E3": add(a, mul(s.m, dg)),
        "GammaTeo": diff(add(dg, mul(s.c, power(g, 2))), U_VAR),
        "Ef": add(f, mul(-s.m * s.L0, power(g, 2)), -s.effective_f0),
    }
    if s.branch == "c_nonzero":
        out["GammaRiccati"] = add(dg, mul(s.c, add(power(g, 2), s.kappa)))
    return out


def split_conditions(model: ExtendedModel, G: Expr | None = None) -> dict[str, Expr]:
    """The pair of conditions equivalent to ``X_H U^m(G) = 0``."""
    G = as_expr(G if G is not None else model.G)
    m, g, a = model.m, model.gamma, model.alpha
    XLG = model.X_L(G)
    e1 = mul(add(mul(m, diff(g, U_VAR)), a), XLG)
    e2 = add(mul(a, g, model.X_L(XLG)), mul(-m, add(mul(diff(a, U_VAR), model.L), diff(model.f, U_VAR)), G))
    return {"E1": e1, "E2": e2}


def hamiltonian_difference(model: ExtendedModel) -> Expr:
    return add(model.H, mul(-1, closed_form_hamiltonian(model.L, model.spec)))


def phase_box(model: ExtendedModel) -> Box:
    return model.box
