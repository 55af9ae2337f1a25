"""Numerical verification of extended models.

Every check produces a :class:`CheckRecord`; a :class:`VerificationReport`
collects them and serialises to line-delimited JSON.  Residuals are the scaled
residuals of :func:`numeric_zero_test`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .extension import ExtendedModel, structure_residuals, power_U, split_conditions
from .phase import PhaseSpace, fd_poisson_bracket, hamiltonian_vector_field, jacobian_values, poisson_bracket
from .symexpr import (
    DomainError,
    Expr,
    add,
    as_expr,
    compile_exprs,
    evaluate_many,
    mul,
    numeric_zero_test,
    sample_valid,
)

DEFAULT_SAMPLES = 100
DEFAULT_TOL = 1e-9
RANK_RCOND = 1e-8


@dataclass
class CheckRecord:
    name: str
    kind: str  # "residual", "trajectory", "independence"
    passed: bool
    value: float  # residual, drift or observed rank
    tol: float | None = None
    samples: int = 0
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "kind": self.kind,
            "pass": bool(self.passed),
            "value": _clean(self.value),
            "tol": _clean(self.tol),
            "samples": int(self.samples),
        }
        if self.detail:
            d["detail"] = _clean(self.detail)
        return d


def _clean(x):
    """Make values JSON-safe and stable (no numpy scalars, no NaN)."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


@dataclass
class VerificationReport:
    records: list[CheckRecord] = field(default_factory=list)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def extend(self, records: Iterable[CheckRecord]):
        for r in records:
            self.add(r)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def summary(self) -> str:
        lines = []
        for r in self.records:
            flag = "PASS" if r.passed else "FAIL"
            tol = "" if r.tol is None else f" (tol {r.tol:.1e})"
            lines.append(f"[{flag}] {r.name}: {r.value:.3e}{tol}")
        lines.append(f"{len(self.records) - len(self.failures)}/{len(self.records)} checks passed")
        return "\n".join(lines)


def zero_record(name: str, e, box, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0, **detail) -> CheckRecord:
    res = numeric_zero_test(e, box, samples=samples, tol=tol, seed=seed)
    return CheckRecord(name, "residual", res.is_zero, res.max_residual, tol, res.samples, dict(detail))


# -- first integrals ---------------------------------------------------------

def first_integral_residual(model: ExtendedModel, F: Expr | None = None, samples: int = DEFAULT_SAMPLES,
                            tol: float = DEFAULT_TOL, seed: int = 0, fd_points: int = 0,
                            name: str = "first_integral") -> CheckRecord:
    """Zero test of ``{H, F}`` (``F`` defaults to ``U^m(G)``) on the model's box.

    With ``fd_points > 0`` the symbolic bracket is also compared against a
    finite-difference bracket at that many points; the largest relative gap is
    stored as ``detail["fd_gap"]``.
    """
    F = as_expr(F if F is not None else model.F)
    if F is None:
        raise ValueError("model has no F; call with_G first")
    br = poisson_bracket(model.H, F, model.space)
    rec = zero_record(name, br, model.box, samples, tol, seed)
    if fd_points:
        rec.detail["fd_gap"] = fd_bracket_gap(model.H, F, model.space, model.box, fd_points, seed)
    return rec


def fd_bracket_gap(A: Expr, B: Expr, space: PhaseSpace, box, points: int = 10, seed: int = 0) -> float:
    """Largest ``|{A,B} - fd{A,B}| / (1 + |dA||dB|)`` over ``points`` sample points."""
    br = poisson_bracket(A, B, space)
    X, vals, _ = sample_valid([br, A, B], box, points, seed=seed + 17)
    names = [v.name for v in box.variables]
    gaps = []
    for x, row in zip(X, vals):
        pt = dict(zip(names, x))
        fd = fd_poisson_bracket(A, B, space, pt)
        gaps.append(abs(row[0] - fd) / (1.0 + abs(row[1]) + abs(row[2])))
    return float(max(gaps))


def commutator_identity_check(model: ExtendedModel, k: int, samples: int = DEFAULT_SAMPLES,
                              tol: float = DEFAULT_TOL, seed: int = 0) -> list[CheckRecord]:
    """``X_H U^k = U^{k-1}(k [X_H,U] + U X_H)`` on G, and ``[[X_H,U],U](G) = 0``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    G = model.G
    XH, U = model.X_H, model.U

    def comm(F):
        return add(XH(U(F)), mul(-1, U(XH(F))))

    lhs = XH(power_U(G, model, k))
    inner = add(mul(k, comm(G)), U(XH(G)))
    rhs = inner
    for _ in range(k - 1):
        rhs = U(rhs)
    double = add(comm(U(G)), mul(-1, U(comm(G))))
    box = model.box
    return [
        zero_record(f"commutator_identity_k{k}", add(lhs, mul(-1, rhs)), box, samples, tol, seed),
        zero_record(f"double_commutator_k{k}", double, box, samples, tol, seed),
    ]


def structural_checks(model: ExtendedModel, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                      seed: int = 0) -> list[CheckRecord]:
    """Structure residuals in u, the E1/E2 split, and ``{H, L} = 0``."""
    box = model.box
    out = [zero_record(k, e, box, samples, tol, seed) for k, e in structure_residuals(model).items()]
    if model.G is not None:
        out += [zero_record(k, e, box, samples, tol, seed) for k, e in split_conditions(model).items()]
    out.append(zero_record("bracket_H_L", poisson_bracket(model.H, model.L, model.space), box, samples, tol, seed))
    return out


# -- sabotages ----------------------------------------------------------------

def sabotage_wrong_power(model: ExtendedModel) -> Expr:
    """``U^{m-1}(G)``: not a first integral unless ``k = m``."""
    return power_U(model.G, model, model.m - 1)


def sabotage_incompatible_potential(model: ExtendedModel) -> ExtendedModel:
    """Rebuild H with ``V + q1^2 + q1`` in place of ``V``; F is recomputed from G."""
    from .extension import build_extended_hamiltonian

    q1 = model.chart.q[0]
    V = as_expr(model.V if model.V is not None else 0)
    bad_V = add(V, mul(q1, q1), q1)
    L = add(model.L, mul(-1, V), bad_V)
    bad = build_extended_hamiltonian(
        L, model.spec, model.chart, metric=model.metric, V=bad_V, key=model.key,
        base_box=model.base_box, momentum_range=model.momentum_range,
    )
    return bad.with_G(model.G)


def sabotage_phi(model: ExtendedModel, phi: Expr | None = None) -> ExtendedModel:
    """Append ``phi(u) F`` to ``U`` (default ``phi = u``)."""
    from .phase import u

    return model.with_phi(phi if phi is not None else u)


def sabotage_checks(model: ExtendedModel, samples: int = DEFAULT_SAMPLES, threshold: float = 1e-3,
                    seed: int = 0) -> list[CheckRecord]:
    """Each sabotage must break the first integral: pass means residual > ``threshold``."""
    out = []
    cases = [
        ("sabotage_wrong_power", model, sabotage_wrong_power(model)),
    ]
    bad_v = sabotage_incompatible_potential(model)
    cases.append(("sabotage_incompatible_V", bad_v, bad_v.F))
    bad_phi = sabotage_phi(model)
    cases.append(("sabotage_phi", bad_phi, bad_phi.F))
    for name, mdl, F in cases:
        br = poisson_bracket(mdl.H, F, mdl.space)
        res = numeric_zero_test(br, mdl.box, samples=samples, tol=threshold, seed=seed)
        out.append(CheckRecord(name, "residual", res.max_residual > threshold, res.max_residual, threshold,
                               res.samples, {"expect": "residual above tol"}))
    return out


# -- trajectories --------------------------------------------------------------

@dataclass
class Trajectory:
    variables: tuple  # state variables, kernel order
    t: np.ndarray
    states: np.ndarray
    values: dict  # integral name -> array along the trajectory
    drift: dict  # integral name -> relative drift
    truncated: bool
    steps: int
    dt: float

    def write_csv(self, path, integral_order: Sequence[str] | None = None):
        """Columns ``t, u, p_u, q^i, p_i`` then the integrals."""
        names = [v.name for v in self.variables]
        order = []
        for q in ("u", "p_u"):
            if q in names:
                order.append(names.index(q))
        order += [i for i, v in enumerate(self.variables) if v.name not in ("u", "p_u")]
        # put base coordinates before base momenta, as in the state layout
        integrals = list(integral_order or self.values)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [names[i] for i in order] + integrals)
            for r in range(len(self.t)):
                row = [repr(float(self.t[r]))] + [repr(float(self.states[r, i])) for i in order]
                row += [repr(float(self.values[k][r])) for k in integrals]
                w.writerow(row)


def _inside(box, variables, X) -> np.ndarray:
    ok = np.ones(len(X), dtype=bool)
    for j, v in enumerate(variables):
        if v in box.bounds and not v.kind.is_momentum:
            lo, hi = box.bounds[v]
            ok &= (X[:, j] > lo) & (X[:, j] < hi)
    return ok


def relative_drift(values: np.ndarray) -> float:
    """``max |I(t) - I(0)| / |I(0)|`` (absolute when ``|I(0)| < 1e-8``)."""
    i0 = values[0]
    denom = abs(i0) if abs(i0) >= 1e-8 else 1.0
    return float(np.max(np.abs(values - i0)) / denom)


def integrate_trajectory(model: ExtendedModel, x0: Mapping, T: float, dt: float,
                         integrals: Mapping[str, Expr] | None = None, stride: int = 1,
                         clip_box=None, backend: str | None = None) -> Trajectory:
    """RK4 integration of Hamilton's equations of ``model.H``.

    ``x0`` maps state-variable names to values.  The run stops at a domain
    failure of the vector field; with ``clip_box`` it is also cut at the first
    recorded state leaving that box (coordinates only).
    """
    space = model.space
    sv = space.state_variables
    try:
        start = np.array([float(x0[v.name]) for v in sv])
    except KeyError as exc:
        raise ValueError(f"initial point lacks {exc.args[0]}") from None
    prog = compile_exprs(hamiltonian_vector_field(model.H, space), sv)
    nsteps = int(round(T / dt))
    kern = _kernels.get_backend(backend)
    traj, done = kern.rk4(prog.op, prog.a, prog.b, prog.c, prog.outputs, start, float(dt), nsteps, int(stride))
    traj = np.asarray(traj)
    truncated = done < nsteps
    if clip_box is not None:
        inside = _inside(clip_box, sv, traj)
        if not inside.all():
            cut = int(np.argmin(inside))
            traj = traj[:cut]
            truncated = True
    t = np.arange(len(traj)) * dt * stride
    if integrals is None:
        integrals = default_integrals(model)
    names = list(integrals)
    vals, _, ok = evaluate_many([integrals[k] for k in names], sv, traj)
    if not ok.all():
        cut = int(np.argmin(ok))
        traj, vals, t = traj[:cut], vals[:cut], t[:cut]
        truncated = True
    if len(traj) == 0:
        raise DomainError("initial point is outside the domain of H")
    values = {k: vals[:, i] for i, k in enumerate(names)}
    drift = {k: relative_drift(v) for k, v in values.items()}
    return Trajectory(sv, t, traj, values, drift, truncated, int(done), float(dt))


def default_integrals(model: ExtendedModel) -> dict:
    out = {"H": model.H, "L": model.L}
    if model.F is not None:
        out["F"] = model.F
    out.update(model.extra_integrals)
    return out


def trajectory_checks(model: ExtendedModel, x0: Mapping, T: float, dt: float, tol: float = 1e-6,
                      order_check: bool = True, ratio_band=(12.0, 20.0),
                      integrals: Mapping[str, Expr] | None = None) -> tuple[list[CheckRecord], Trajectory]:
    """Drift of each integral below ``tol``; optionally the step-halving ratio."""
    tr = integrate_trajectory(model, x0, T, dt, integrals)
    out = []
    for k, d in tr.drift.items():
        out.append(CheckRecord(f"drift_{k}", "trajectory", (d < tol) and not tr.truncated, d, tol, len(tr.t),
                               {"T": T, "dt": dt, "truncated": tr.truncated}))
    if order_check:
        half = integrate_trajectory(model, x0, T, dt / 2, integrals)
        for k, d in tr.drift.items():
            d2 = half.drift[k]
            ratio = d / d2 if d2 > 0 else math.inf
            lo, hi = ratio_band
            out.append(CheckRecord(f"order_{k}", "trajectory", lo <= ratio <= hi, ratio, None, len(half.t),
                                   {"drift_dt": d, "drift_dt_half": d2, "band": list(ratio_band)}))
    return out, tr


# -- independence ----------------------------------------------------------------

def independence_rank(integrals: Sequence[Expr], space: PhaseSpace, X: np.ndarray,
                      rcond: float = RANK_RCOND) -> tuple[int, np.ndarray]:
    """Numeric Jacobian rank of ``integrals``, maximised over the rows of ``X``.

    Returns ``(rank, ranks_per_point)``; points where evaluation fails get -1.
    """
    if len(integrals) < 1:
        raise ValueError("need at least one integral")
    J = jacobian_values(integrals, space, X)
    ranks = np.full(len(X), -1, dtype=int)
    for i, Ji in enumerate(J):
        if not np.all(np.isfinite(Ji)):
            continue
        s = np.linalg.svd(Ji, compute_uv=False)
        ranks[i] = int(np.sum(s > rcond * s[0])) if s[0] > 0 else 0
    if np.all(ranks < 0):
        raise DomainError("independence rank is indeterminate: every point was degenerate")
    return int(ranks.max()), ranks


def independence_check(model: ExtendedModel, names: Sequence[str], expected: int, samples: int = 30,
                       seed: int = 0) -> CheckRecord:
    available = default_integrals(model)
    exprs = [available[k] for k in names]
    X = model.box.sample_random(samples, seed=seed)
    rank, _ = independence_rank(exprs, model.space, X)
    return CheckRecord("rank_" + "_".join(names), "independence", rank == expected, rank, None, samples,
                       {"expected": expected, "integrals": list(names)})


def bracket_witness(model: ExtendedModel, samples: int = 30, seed: int = 0, threshold: float = 1e-6) -> CheckRecord:
    """``{L, U^m(G)}`` must be nonzero somewhere for non-constant G."""
    br = poisson_bracket(model.L, model.F, model.space)
    _, vals, scale = sample_valid([br], model.box, samples, seed=seed)
    peak = float(np.max(np.abs(vals[:, 0]) / (1.0 + scale)))
    return CheckRecord("witness_L_F_nonzero", "independence", peak > threshold, peak, threshold, samples)
