import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extham.phase import PhaseSpace, fd_poisson_bracket, p_u, poisson_bracket, u
from extham.symexpr import Box, VarKind, cos, evaluate, exp, numeric_zero_test, sin, symbols
from extham.verifier import (
    CheckRecord,
    VerificationReport,
    bracket_witness,
    commutator_identity_check,
    fd_bracket_gap,
    first_integral_residual,
    independence_check,
    independence_rank,
    integrate_trajectory,
    relative_drift,
    sabotage_checks,
    sabotage_wrong_power,
    structural_checks,
    trajectory_checks,
)

from conftest import built

q1, q2 = symbols("q1 q2")
p1, p2 = symbols("p1 p2", VarKind.MOMENTUM)
SPACE = PhaseSpace(((q1.var, p1.var), (q2.var, p2.var)))
BOX = Box({v.var: (-1.0, 1.0) for v in (q1, q2, p1, p2)})


def zero(e, box=BOX):
    res = numeric_zero_test(e, box)
    assert res.is_zero, res


# -- brackets ---------------------------------------------------------------------

def test_bracket_examples():
    assert float(poisson_bracket(q1, p1, SPACE).value) == 1.0
    assert float(poisson_bracket(p1, q1, SPACE).value) == -1.0
    L = (p1**2 + p2**2) / 2 + q1**2
    zero(poisson_bracket(L, L, SPACE))
    zero(poisson_bracket(q1 * p2 - q2 * p1, (p1**2 + p2**2) / 2 + q1**2 + q2**2, SPACE))


atoms = st.sampled_from([q1, q2, p1, p2, sin(q1), cos(q2) * p1, p1 * p2, exp(q2 / 3)])
funcs = st.tuples(atoms, atoms, st.floats(-2, 2, allow_nan=False)).map(lambda t: t[0] * t[1] + round(t[2], 2) * t[0])


@settings(max_examples=20, deadline=None)
@given(funcs, funcs, funcs)
def test_bracket_antisymmetry_and_leibniz(A, B, C):
    zero(poisson_bracket(A, B, SPACE) + poisson_bracket(B, A, SPACE))
    zero(poisson_bracket(A, B * C, SPACE) - poisson_bracket(A, B, SPACE) * C - B * poisson_bracket(A, C, SPACE))


def test_bracket_against_finite_differences():
    A = sin(q1) * p2**2 + q2 * p1
    B = exp(q2 / 2) * p1 + q1**2 * p2
    for x in BOX.sample(10, seed=2):
        pt = dict(zip([v.name for v in BOX.variables], x))
        sym = evaluate(poisson_bracket(A, B, SPACE), pt)
        assert sym == pytest.approx(fd_poisson_bracket(A, B, SPACE, pt), abs=1e-7)
    assert fd_bracket_gap(A, B, SPACE, BOX) < 1e-7


# -- first integrals and structure -------------------------------------------------

@pytest.mark.parametrize("name", ["ex2_pseudosphere_m1", "ex2_pseudosphere_m2", "ex2_sphere", "ex3_hopf",
                                  "ex2_flat", "ex1_line_k1"])
def test_first_integral_holds(name):
    model = built(name)[0]
    rec = first_integral_residual(model, fd_points=5)
    assert rec.passed, rec
    assert rec.detail["fd_gap"] < 1e-6
    assert all(r.passed for r in structural_checks(model)), [r for r in structural_checks(model) if not r.passed]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_commutator_identity(pseudo2, k):
    recs = commutator_identity_check(pseudo2[0], k)
    assert [r.name for r in recs] == [f"commutator_identity_k{k}", f"double_commutator_k{k}"]
    assert all(r.passed for r in recs)
    with pytest.raises(ValueError):
        commutator_identity_check(pseudo2[0], 0)


def test_sabotages_break_the_integral(pseudo2, pseudo1):
    for model in (pseudo1[0], pseudo2[0]):
        recs = sabotage_checks(model)
        assert {r.name for r in recs} == {"sabotage_wrong_power", "sabotage_incompatible_V", "sabotage_phi"}
        for r in recs:
            assert r.passed and r.value > 1e-3, r


def test_wrong_gamma_breaks_integral_but_not_double_commutator(pseudo2):
    model = pseudo2[0]
    bad = model.with_gamma(model.gamma**2)
    assert not first_integral_residual(bad).passed
    double = commutator_identity_check(bad, 2)[1]
    assert double.passed


def test_witness(pseudo2):
    assert bracket_witness(pseudo2[0]).passed


# -- trajectories ---------------------------------------------------------------------

def test_relative_drift():
    assert relative_drift(np.array([2.0, 2.1, 1.8])) == pytest.approx(0.1)
    assert relative_drift(np.array([0.0, 1e-3])) == pytest.approx(1e-3)


def test_free_line_drift():
    model, _, cfg = built("ex1_line_free")
    tr = integrate_trajectory(model, cfg.trajectory.x0, 10.0, 1e-3)
    assert not tr.truncated
    assert tr.drift["H"] < 1e-8 and tr.drift["F"] < 1e-8


def test_pseudosphere_trajectory(pseudo2):
    model, _, cfg = pseudo2
    recs, tr = trajectory_checks(model, cfg.trajectory.x0, 5.0, 1e-3, tol=1e-6)
    assert all(r.passed for r in recs), [r for r in recs if not r.passed]
    assert {"drift_H", "drift_F", "order_H", "order_F"} <= {r.name for r in recs}


def test_wrong_power_is_not_conserved(pseudo2):
    model, _, cfg = pseudo2
    tr = integrate_trajectory(model, cfg.trajectory.x0, 5.0, 1e-3,
                              integrals={"H": model.H, "F_wrong": sabotage_wrong_power(model)})
    assert tr.drift["H"] < 1e-6
    assert tr.drift["F_wrong"] > 1e-2


def test_backends_agree(pseudo2):
    model, _, cfg = pseudo2
    a = integrate_trajectory(model, cfg.trajectory.x0, 0.2, 1e-3, backend="pure")
    b = integrate_trajectory(model, cfg.trajectory.x0, 0.2, 1e-3)
    np.testing.assert_allclose(a.states, b.states, rtol=1e-12, atol=1e-12)


def test_trajectory_needs_full_initial_point(pseudo2):
    with pytest.raises(ValueError):
        integrate_trajectory(pseudo2[0], {"u": 1.0}, 1.0, 0.1)


def test_csv_columns(pseudo2, tmp_path):
    model, _, cfg = pseudo2
    tr = integrate_trajectory(model, cfg.trajectory.x0, 0.05, 1e-2)
    path = tmp_path / "t.csv"
    tr.write_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:7] == ["t", "u", "p_u", "eta", "xi", "p1", "p2"]
    assert rows[0][7:] == list(tr.values)
    assert len(rows) == len(tr.t) + 1
    assert float(rows[1][1]) == cfg.trajectory.x0["u"]


# -- independence ---------------------------------------------------------------------

def test_rank_of_repeated_function_is_one():
    L = (p1**2 + p2**2) / 2 + q1**2
    X = BOX.sample_random(10, seed=0)
    assert independence_rank([L, L], SPACE, X)[0] == 1
    assert independence_rank([L, 2 * L + 1], SPACE, X)[0] == 1
    assert independence_rank([L, q1 * p2 - q2 * p1], SPACE, X)[0] == 2


def test_pseudosphere_ranks(pseudo1):
    model = pseudo1[0]
    assert independence_check(model, ["H", "L", "F"], 3).passed
    rec = independence_check(model, ["H", "L", "H1", "F"], 4)
    assert rec.passed and rec.value == 4


# -- report -------------------------------------------------------------------------

def test_report_serialisation():
    rep = VerificationReport()
    rep.add(CheckRecord("a", "residual", True, 1e-12, 1e-9, 100, {}))
    rep.add(CheckRecord("b", "residual", False, float("inf"), 1e-9, 100, {"x": np.float64(1.5)}))
    lines = rep.to_jsonl().strip().splitlines()
    rows = [json.loads(s) for s in lines]
    assert [r["name"] for r in rows] == ["a", "b"]
    assert rows[1]["detail"]["x"] == 1.5
    assert not rep.passed and [r.name for r in rep.failures] == ["b"]
    assert "[FAIL] b" in rep.summary()


def test_u_and_p_u_are_extended_variables():
    assert u.var.kind is VarKind.EXT_COORDINATE
    assert p_u.var.kind is VarKind.EXT_MOMENTUM
