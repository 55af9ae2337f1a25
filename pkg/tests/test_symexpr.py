import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extham.symexpr import (
    C,
    CT,
    Box,
    DomainError,
    NonPolynomialError,
    ParseError,
    S,
    T,
    UnboundVariableError,
    Variable,
    VarKind,
    central_difference,
    const,
    cos,
    cosh,
    diff,
    evaluate,
    exp,
    format_expr,
    momentum_degree,
    numeric_zero_test,
    parse_expr,
    sin,
    sqrt,
    substitute,
    symbols,
    to_polynomial,
    var,
)

x, y = symbols("x y")
p, r = symbols("p r", VarKind.MOMENTUM)
X, Y, P, R = x.var, y.var, p.var, r.var
BOX = Box({X: (-1.0, 1.0), Y: (-1.0, 1.0), P: (-1.0, 1.0), R: (-1.0, 1.0)})
KAPPAS = (-1.0, 0.0, 1.0)


# -- random expressions over x, y, p that are finite on [-1, 1]^3 --------------------

leaves = st.one_of(
    st.sampled_from([x, y, p]),
    st.integers(-3, 3).map(const),
    st.floats(-2, 2, allow_nan=False).map(lambda v: const(round(v, 3))),
)


def _extend(children):
    kappa = st.sampled_from(KAPPAS)
    return st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: t[0] * t[1]),
        st.tuples(children, st.integers(0, 3)).map(lambda t: t[0] ** t[1]),
        st.tuples(children, children).map(lambda t: t[0] / (2 + cos(t[1]))),
        children.map(sin),
        children.map(lambda e: sqrt(1 + e * e)),
        children.map(lambda e: exp(sin(e))),
        children.map(lambda e: cosh(sin(e))),
        st.tuples(kappa, children).map(lambda t: S(t[0], sin(t[1]))),
        st.tuples(kappa, children).map(lambda t: C(t[0], sin(t[1]))),
    )


expressions = st.recursive(leaves, _extend, max_leaves=8)
points = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).map(lambda t: {"x": t[0], "y": t[1], "p": t[2]})


# -- diff ---------------------------------------------------------------------

def test_diff_tagged_sine_is_tagged_cosine():
    for k in KAPPAS:
        if k == 0:
            assert diff(S(k, x), X) is const(1)
        else:
            assert diff(S(k, x), X) is C(k, x)


def test_diff_constant_is_zero():
    assert diff(const(4.2), X) is const(0)


def test_diff_x_p2_matches_finite_difference():
    e = x * p**2
    d = diff(e, P)
    assert numeric_zero_test(d - 2 * x * p, BOX).is_zero
    pt = {"x": 1.3, "p": 0.7}
    fd = central_difference(e, P, pt, step=1e-6)
    assert abs(evaluate(d, pt) - fd) <= 1e-7 * abs(fd)


@settings(max_examples=100, deadline=None)
@given(expressions, points, st.sampled_from(["x", "y", "p"]))
def test_diff_matches_central_difference(e, pt, name):
    v = {"x": X, "y": Y, "p": P}[name]
    d = evaluate(diff(e, v), pt) if e.free else 0.0
    fd = central_difference(e, v, pt, step=1e-6) if e.free else 0.0
    scale = 1.0 + abs(evaluate(e, pt) if e.free else 0.0) + abs(d)
    assert abs(d - fd) <= 1e-6 * scale


# -- eval ------------------------------------------------------------------------

def test_eval_examples():
    assert evaluate(S(0, x), {"x": 3.7}) == pytest.approx(3.7, abs=1e-15)
    assert evaluate(C(1, x), {"x": 0.0}) == 1.0
    k = -1.0
    assert evaluate(C(k, x) ** 2 + k * S(k, x) ** 2, {"x": 0.9}) == pytest.approx(1.0, abs=1e-14)


def test_eval_tagged_definitions():
    v = 0.37
    assert evaluate(S(4, x), {"x": v}) == pytest.approx(math.sin(2 * v) / 2)
    assert evaluate(S(-4, x), {"x": v}) == pytest.approx(math.sinh(2 * v) / 2)
    assert evaluate(C(-4, x), {"x": v}) == pytest.approx(math.cosh(2 * v))
    assert evaluate(CT(0, x), {"x": v}) == pytest.approx(1 / v)


def test_eval_errors():
    with pytest.raises(DomainError):
        evaluate(1 / x, {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(sqrt(x), {"x": -1.0})
    with pytest.raises(UnboundVariableError):
        evaluate(x + y, {"x": 1.0})


def test_eval_accepts_variable_keys():
    assert evaluate(x * y, {X: 2.0, "y": 3.0}) == 6.0


# -- tagged identities -------------------------------------------------------------

@pytest.mark.parametrize("k", KAPPAS)
def test_tagged_identities(k):
    box = Box({X: (0.1, 1.2)})
    checks = [
        C(k, x) ** 2 + k * S(k, x) ** 2 - 1,
        diff(S(k, x), X) - C(k, x),
        diff(C(k, x), X) + k * S(k, x),
        T(k, x) - S(k, x) / C(k, x),
        CT(k, x) - C(k, x) / S(k, x),
    ]
    for e in checks:
        res = numeric_zero_test(e, box, samples=50)
        assert res.is_zero, (k, format_expr(e), res.max_residual)


def test_zero_test_rejects_nonzero():
    assert not numeric_zero_test(var(Variable("p_u", VarKind.EXT_MOMENTUM)),
                                 Box({Variable("p_u", VarKind.EXT_MOMENTUM): (-1, 1)})).is_zero


def test_zero_test_resamples_around_singularities():
    # 1/(x - 0.5) is singular inside the box but the zero test only needs finite points
    e = (1 / (x - 0.5)) * 0
    assert numeric_zero_test(e + x - x, BOX).is_zero


def test_zero_test_fails_on_unbound_variables():
    with pytest.raises(UnboundVariableError):
        numeric_zero_test(x + var(Variable("zz")), BOX)


# -- momentum structure --------------------------------------------------------------

def test_momentum_degree_examples():
    u_ = var(Variable("u", VarKind.EXT_COORDINATE))
    pu = var(Variable("p_u", VarKind.EXT_MOMENTUM))
    H = pu**2 / 2 + sin(u_) * (p**2 + x * p * r)
    assert momentum_degree(H) == 2
    assert momentum_degree(sin(x) * y) == 0
    assert momentum_degree((p + x) ** 3 - p**3) == 2
    with pytest.raises(NonPolynomialError):
        momentum_degree(sin(p))
    with pytest.raises(NonPolynomialError):
        momentum_degree(1 / p)


def test_momentum_degree_drops_cancelled_terms_numerically():
    e = (sin(x) ** 2 + cos(x) ** 2 - 1) * p**3 + p
    assert momentum_degree(e) == 3
    assert momentum_degree(e, box=BOX) == 1


polys = st.recursive(
    st.one_of(st.sampled_from([x, y, p, r, sin(x), const(2)])),
    lambda ch: st.one_of(st.tuples(ch, ch).map(lambda t: t[0] + t[1]), st.tuples(ch, ch).map(lambda t: t[0] * t[1])),
    max_leaves=6,
)


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_momentum_degree_is_additive(a, b):
    da, db = momentum_degree(a, box=BOX), momentum_degree(b, box=BOX)
    assert momentum_degree(a * b, box=BOX) == da + db


def test_to_polynomial_roundtrip():
    e = (p + x * r) ** 2 * cos(y)
    mom, poly = to_polynomial(e)
    assert set(mom) == {P, R}
    assert max(sum(k) for k in poly) == 2


# -- structure ---------------------------------------------------------------------

def test_expressions_are_immutable_and_shared():
    e = sin(x) + y
    with pytest.raises(AttributeError):
        e.args = ()
    assert (sin(x) + y) is e
    assert (y + sin(x)) is e


def test_like_terms_collect():
    assert x + x is 2 * x
    assert x * x is x**2
    assert (x - x) is const(0)


def test_substitute():
    e = substitute(x**2 + y, {X: sin(y)})
    assert numeric_zero_test(e - sin(y) ** 2 - y, BOX).is_zero


def test_pickle_keeps_identity():
    e = S(-1, x) * p + cosh(y)
    assert pickle.loads(pickle.dumps(e)) is e


# -- text format ------------------------------------------------------------------

TABLE = {"x": X, "y": Y, "p": P}


@settings(max_examples=100, deadline=None)
@given(expressions)
def test_format_parse_roundtrip(e):
    back = parse_expr(format_expr(e), TABLE)
    assert numeric_zero_test(back - e, BOX, samples=20).is_zero


def test_parse_examples():
    e = parse_expr("S[-1](x)**2 - sinh(x)**2 + CT[0](y)*y", TABLE)
    assert numeric_zero_test(e - 1, Box({X: (-1, 1), Y: (0.2, 1)})).is_zero
    assert parse_expr("2*pi", {}) is const(2 * math.pi)
    assert format_expr(parse_expr("x/y**2", TABLE)) == "x/y**2"


@pytest.mark.parametrize("bad", ["", "x +", "foo(x)", "x**0.5", "z", "x = 1", "S(x)"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_expr(bad, TABLE)


def test_evaluate_many_matches_scalar():
    from extham.symexpr import evaluate_many

    e = S(-1, x) * p + cos(y) / (2 + x)
    pts = BOX.sample(10)
    vals, _, ok = evaluate_many([e], BOX.variables, pts)
    assert ok.all()
    for row, v in zip(pts, vals[:, 0]):
        pt = dict(zip([w.name for w in BOX.variables], row))
        assert evaluate(e, pt) == pytest.approx(v, rel=1e-14)


def test_box_sampling_is_seeded_and_honours_exclusions():
    box = Box({X: (0, 1), Y: (0, 1)}, excluded=((X, 0.5, 0.1),))
    a, b = box.sample(40, seed=3), box.sample(40, seed=3)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a[:, 0] - 0.5) > 0.1)
    assert np.all(np.abs(box.sample_random(40, seed=1)[:, 0] - 0.5) > 0.1)
