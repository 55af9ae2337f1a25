"""Built-in constant-curvature charts with closed-form Hessian-equation bases and potentials.

Each :class:`Model` knows its chart, inverse metric, curvature, a safe
sampling box, the ``n+1`` basis functions solving ``H(G) = -K g G``, and a few
named potentials together with the ``a``-coefficient pattern they are
compatible with.  Every shipped potential is checked by ``v_residual`` in the
test-suite rather than trusted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .geometry import Chart, Metric
from .symexpr import (
    ZERO,
    C,
    Expr,
    S,
    cos,
    cosh,
    exp,
    power,
    sin,
    sinh,
    tan,
)


class UnknownModelError(KeyError):
    pass


class IncompatibleCoefficientsError(ValueError):
    pass


PotentialBuilder = Callable[["Model", int, float, float, tuple], Expr]


@dataclass(frozen=True)
class PotentialRecipe:
    name: str
    description: str
    build: PotentialBuilder
    # extra first integrals of L for this potential: (model, m, c, L0, a) -> {name: Expr}
    integrals: Callable | None = None

    def __call__(self, model, m, c, L0, a):
        return self.build(model, m, c, L0, tuple(a))


@dataclass
class Model:
    key: str
    description: str
    chart: Chart
    metric: Metric
    K: float | None  # None: one-dimensional, any K admissible
    basis: Callable[[float], list[Expr]] | None
    basis_labels: tuple[str, ...] = ()
    potentials: dict[str, PotentialRecipe] = field(default_factory=dict)
    stub: bool = False  # registered for curvature checks only

    @property
    def n(self) -> int:
        return self.chart.dimension

    def coordinate(self, name: str) -> Expr:
        return self.chart.q[[v.name for v in self.chart.coordinates].index(name)]

    def describe(self) -> dict:
        b = self.chart.coordinate_box()
        return {
            "key": self.key,
            "description": self.description,
            "n": self.n,
            "K": self.K,
            "coordinates": [v.name for v in self.chart.coordinates],
            "momenta": [v.name for v in self.chart.momenta],
            "inverse_metric": [[str(e) for e in row] for row in self.metric.inverse],
            "safe_box": {v.name: list(b.bounds[v]) for v in self.chart.coordinates},
            "excluded_bands": [[v.name, c, h] for v, c, h in b.excluded],
            "gbasis": list(self.basis_labels) if self.basis else [],
            "potentials": {k: p.description for k, p in self.potentials.items()},
            "stub": self.stub,
        }


def _require(cond: bool, msg: str):
    if not cond:
        raise IncompatibleCoefficientsError(msg)


def _free(model, m, c, L0, a):
    _require(L0 == 0.0, "the free potential V=0 is compatible only with L0=0")
    return ZERO


def _linear(model, m, c, L0, a):
    # deliberately incompatible; used for sabotage runs
    return model.chart.q[0]


FREE = PotentialRecipe("free", "V = 0 (geodesic L), compatible with every G for L0 = 0", _free)
LINEAR = PotentialRecipe("linear", "V = q^1 (incompatible control potential)", _linear)


# -- line1: L = p_v^2/2 + V(v) ------------------------------------------------

def _line1() -> Model:
    chart = Chart.make(["v"], [(0.1, 1.0)])
    metric = Metric(chart, [[1]])
    (v,) = chart.q

    def basis(mc):
        return [S(mc, v), C(mc, v)]

    def inverse_c2(model, m, c, L0, a):
        _require(len(a) == 2 and a[1] == 0.0 and a[0] != 0.0, "1/C^2 potential needs a = (a1, 0)")
        mc = m * c
        # adding V0 shifts the compatible L0 by -c*V0
        shift = -L0 / c if c != 0 else 0.0
        _require(c != 0 or L0 == 0.0, "c = 0 requires L0 = 0 here")
        return power(C(mc, v), -2) + shift

    return Model(
        "line1",
        "one-dimensional L = p_v^2/2 + V(v)",
        chart,
        metric,
        None,
        basis,
        ("S[mc](v)", "C[mc](v)"),
        {
            "free": FREE,
            "linear": LINEAR,
            "inverse_c2": PotentialRecipe("inverse_c2", "V = 1/C[mc](v)^2 (- L0/c); needs a = (a1, 0)", inverse_c2),
        },
    )


# -- flat charts ----------------------------------------------------------------

def _euclidean(n: int) -> Model:
    names = [f"q{i}" for i in range(1, n + 1)]
    chart = Chart.make(names, [(-1.5, 1.5)] * n)
    metric = Metric(chart, [[1 if i == j else 0 for j in range(n)] for i in range(n)])
    q = chart.q

    def basis(mc):
        return [q[0] * 0 + 1] + list(q)

    potentials = {"free": FREE, "linear": LINEAR}
    if n == 2:

        def harmonic(model, m, c, L0, a):
            _require(c == 0.0, "the flat potentials belong to the c = 0 branch")
            k0, k1, k2 = a
            F = lambda x: x**3  # noqa: E731
            if k1 != 0 and k2 != 0:
                return m * L0 * ((q[0] + k0 / (2 * k1)) ** 2 + (q[1] + k0 / (2 * k2)) ** 2) + F(k1 * q[1] - k2 * q[0])
            if k2 == 0:
                _require(k1 != 0, "G must be non-constant")
                return m * L0 * (q[0] + k0 / k1) ** 2 + F(q[1])
            return m * L0 * (q[1] + k0 / k2) ** 2 + F(q[0])

        potentials["harmonic_cubic"] = PotentialRecipe(
            "harmonic_cubic", "V = m L0 |q + shift|^2 + F(k1 q2 - k2 q1), F(x) = x^3", harmonic
        )
    return Model(
        f"euclidean{n}",
        f"Euclidean space E^{n}, Cartesian coordinates",
        chart,
        metric,
        0.0,
        basis,
        ("1",) + tuple(names),
        potentials,
    )


# -- sphere S^2 (theta, phi) -----------------------------------------------------

def _sphere2() -> Model:
    chart = Chart.make(
        ["theta", "phi"],
        [(0.2, math.pi - 0.2), (0.0, 2 * math.pi)],
        excluded=[(0, math.pi / 2, 0.15)],
    )
    th, ph = chart.q
    metric = Metric(chart, [[1, 0], [0, power(sin(th), -2)]])

    def basis(mc):
        return [sin(ph) * sin(th), cos(ph) * sin(th), cos(th)]

    def tan_family(model, m, c, L0, a):
        a1, a2, a3 = a
        _require(a3 == 0.0 and (a1, a2) != (0.0, 0.0), "needs a3 = 0")
        _require(L0 == 0.0, "needs L0 = 0")
        arg = (a1 * cos(ph) - a2 * sin(ph)) * tan(th)
        return power(cos(th), -2) * arg  # F(x) = x

    return Model(
        "sphere2",
        "round sphere S^2, K = 1, spherical coordinates (theta, phi)",
        chart,
        metric,
        1.0,
        basis,
        ("sin(phi)*sin(theta)", "cos(phi)*sin(theta)", "cos(theta)"),
        {
            "free": FREE,
            "linear": LINEAR,
            "tan_family": PotentialRecipe(
                "tan_family", "V = F((a1 cos phi - a2 sin phi) tan theta)/cos^2 theta, F(x) = x; needs a3 = 0", tan_family
            ),
        },
    )


def perturbed_sphere_metric(eps: float = 0.1) -> Metric:
    """Sphere chart with ``g^22 = (1 + eps theta^2)/sin^2 theta``: not constant curvature."""
    chart = _sphere2().chart
    th, _ = chart.q
    return Metric(chart, [[1, 0], [0, power(sin(th), -2) * (1 + eps * th**2)]])


# -- pseudosphere H^2 (eta, xi) --------------------------------------------------

def _pseudosphere2() -> Model:
    chart = Chart.make(["eta", "xi"], [(0.2, 1.3), (-1.5, 1.5)])
    eta, xi = chart.q
    metric = Metric(chart, [[1, 0], [0, power(cosh(eta), -2)]])

    def basis(mc):
        # coefficients of a1, a2, a3 in (a1 + a2 e^xi + a3 e^-xi) e^-eta + (a2 e^xi + a3 e^-xi - a1) e^eta
        return [-2 * sinh(eta), 2 * exp(xi) * cosh(eta), 2 * exp(-xi) * cosh(eta)]

    def stackel(model, m, c, L0, a):
        _require(a[1] == 0.0 and a[2] == 0.0 and a[0] != 0.0, "needs a2 = a3 = 0")
        _require(L0 == 0.0, "needs L0 = 0")
        return xi**2 * power(cosh(eta), -2)  # F(xi) = xi^2

    def stackel_integrals(model, m, c, L0, a):
        p1, p2 = model.chart.p
        return {"H1": 0.5 * p2**2 + xi**2}

    return Model(
        "pseudosphere2",
        "pseudosphere H^2, K = -1, coordinates (eta, xi) with g^22 = cosh^-2 eta",
        chart,
        metric,
        -1.0,
        basis,
        ("-2*sinh(eta)", "2*exp(xi)*cosh(eta)", "2*exp(-xi)*cosh(eta)"),
        {
            "free": FREE,
            "linear": LINEAR,
            "stackel": PotentialRecipe(
                "stackel", "V = F(xi)/cosh^2 eta, F(x) = x^2; needs a2 = a3 = 0", stackel, stackel_integrals
            ),
        },
    )


# -- S^3 in Hopf coordinates (eta, xi1, xi2) -------------------------------------

def _hopf_s3() -> Model:
    chart = Chart.make(
        ["eta", "xi1", "xi2"],
        [(0.2, 1.3), (0.0, 2 * math.pi), (0.0, 2 * math.pi)],
        excluded=[(2, math.pi / 2, 0.15), (2, 3 * math.pi / 2, 0.15)],
    )
    eta, x1, x2 = chart.q
    metric = Metric(chart, [[1, 0, 0], [0, power(sin(eta), -2), 0], [0, 0, power(cos(eta), -2)]])

    def basis(mc):
        return [sin(x2) * cos(eta), cos(x2) * cos(eta), sin(x1) * sin(eta), cos(x1) * sin(eta)]

    def nonstackel(model, m, c, L0, a):
        _require(a[1] == a[2] == a[3] == 0.0 and a[0] != 0.0, "needs a2 = a3 = a4 = 0")
        _require(L0 == 0.0, "needs L0 = 0")
        w = tan(eta) / cos(x2)
        F = sin(x1) * w  # F(xi1, w) = sin(xi1) w = sin(xi1) tan(eta)/cos(xi2)
        return power(sin(eta), -2) * F

    return Model(
        "hopf_s3",
        "round sphere S^3, K = 1, Hopf coordinates (eta, xi1, xi2)",
        chart,
        metric,
        1.0,
        basis,
        ("sin(xi2)*cos(eta)", "cos(xi2)*cos(eta)", "sin(xi1)*sin(eta)", "cos(xi1)*sin(eta)"),
        {
            "free": FREE,
            "linear": LINEAR,
            "nonstackel": PotentialRecipe(
                "nonstackel", "V = F(xi1, tan(eta)/cos(xi2))/sin^2 eta with F = sin(xi1) tan(eta)/cos(xi2)", nonstackel
            ),
        },
    )


# -- two-dimensional Liouville metrics of the n = 1 extension (stubs) ------------

def _liouville(key: str, kappa: float, c: float, m: int = 1) -> Model:
    """``du^2 + S_kappa(cu)^2/(mc) dv^2``; curvature ``c^2 kappa``."""
    chart = Chart.make(["s", "v"], [(0.3, 1.2), (-1.0, 1.0)])
    s, _ = chart.q
    metric = Metric(
        chart,
        [[1, 0], [0, m * c * power(S(kappa, c * s), -2)]],
        signature="riemannian" if m * c > 0 else "lorentzian",
    )
    return Model(
        key,
        f"Liouville metric of the n=1 extension, c={c:g}, kappa={kappa:g}",
        chart,
        metric,
        c * c * kappa,
        None,
        stub=True,
    )


def _build_registry() -> dict[str, Model]:
    models = [
        _line1(),
        _euclidean(2),
        _euclidean(3),
        _sphere2(),
        _pseudosphere2(),
        _hopf_s3(),
        _liouville("minkowski2", 0.0, -1.0),
        _liouville("desitter2", 1.0, -1.0),
        _liouville("antidesitter2", -1.0, -1.0),
    ]
    return {m.key: m for m in models}


REGISTRY: dict[str, Model] = _build_registry()


def list_models() -> list[str]:
    return list(REGISTRY)


def get_model(key: str) -> Model:
    try:
        return REGISTRY[key]
    except KeyError:
        raise UnknownModelError(f"unknown model {key!r}; known: {', '.join(REGISTRY)}") from None


def describe_model(key: str) -> dict:
    return get_model(key).describe()
