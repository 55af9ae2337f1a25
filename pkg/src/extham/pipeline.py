"""Config-driven construction and verification of an extended Hamiltonian.

Steps: classify the base curvature, pick G from the model's basis, check the
potential, build H, then compute ``F = U^m(G)`` and run the verification suite.
Configs are INI files read with :mod:`configparser`; expression-valued keys use
the text grammar of :mod:`extham.symexpr.textfmt`.
"""
from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .extension import (
    ExtendedModel,
    ExtensionSpec,
    InvalidSpecError,
    build_extended_hamiltonian,
    hamiltonian_difference,
    natural_hamiltonian,
)
from .geometry import classify_curvature
from .models import IncompatibleCoefficientsError, Model, UnknownModelError, get_model
from .phase import PU_VAR, U_VAR, poisson_bracket
from .structure import (
    CurvatureMismatchError,
    IncompatiblePotentialError,
    builtin_gbasis,
    check_e10_form,
    eigen_residual,
    gram_rank,
    hess_residual,
    v_residual,
)
from .symexpr import (
    Expr,
    ParseError,
    as_expr,
    format_expr,
    momentum_degree,
    parse_expr,
    substitute,
    Variable,
    VarKind,
)
from .verifier import (
    CheckRecord,
    VerificationReport,
    bracket_witness,
    commutator_identity_check,
    first_integral_residual,
    independence_check,
    sabotage_checks,
    structural_checks,
    trajectory_checks,
    zero_record,
)

log = logging.getLogger(__name__)

GOLDEN_KEYS = ("H", "F", "gamma", "alpha", "f", "G", "L", "V")


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration (exit status 2)."""


@dataclass
class TrajectorySettings:
    T: float = 5.0
    dt: float = 1e-3
    x0: dict = field(default_factory=dict)
    drift_tol: float = 1e-6
    order_check: bool = True


@dataclass
class PipelineConfig:
    model: str
    m: int
    c: float
    kappa: float = 0.0
    u0: float = 0.0
    L0: float = 0.0
    f0: float = 0.0
    A: float = 1.0
    V0: float = 0.0
    u_range: tuple = (0.5, 2.0)
    momentum_range: float = 1.0
    a: tuple = ()
    G_text: str | None = None
    potential: str | None = "free"
    V_text: str | None = None
    samples: int = 100
    tol: float = 1e-9
    seed: int = 0
    commutator_k: tuple = (1, 2, 3)
    sabotage: bool = True
    independence: tuple = ()  # ((names...), expected_rank)
    expected: dict = field(default_factory=dict)  # "F" -> text, may use L and V
    trajectory: TrajectorySettings | None = None
    out_dir: str | None = None
    name: str = "run"

    @property
    def spec(self) -> ExtensionSpec:
        return ExtensionSpec(self.m, self.c, self.kappa, self.u0, self.L0, self.f0, self.A, self.V0,
                             tuple(self.u_range))


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _pairs(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        k, _, v = item.partition("=")
        if not _:
            raise ConfigError(f"expected name=value in {item!r}")
        out[k.strip()] = float(v)
    return out


def load_config(path: str | os.PathLike) -> PipelineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep key case (A, V0, L0, T)
    try:
        read = cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config {path}")
    cfg = config_from_parser(cp)
    if cfg.name == "run":
        cfg.name = Path(path).stem
    return cfg


def config_from_text(text: str) -> PipelineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> PipelineConfig:
    if not cp.sections():
        raise ConfigError("empty config: a [model] and an [extension] section are required")
    for sec in ("model", "extension"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing [{sec}] section")
    try:
        ext = cp["extension"]
        model = cp["model"].get("key")
        if not model:
            raise ConfigError("[model] needs key = <registry key>")
        cfg = PipelineConfig(
            model=model,
            m=ext.getint("m"),
            c=ext.getfloat("c"),
            kappa=ext.getfloat("kappa", 0.0),
            u0=ext.getfloat("u0", 0.0),
            L0=ext.getfloat("L0", 0.0),
            f0=ext.getfloat("f0", 0.0),
            A=ext.getfloat("A", 1.0),
            V0=ext.getfloat("V0", 0.0),
            u_range=(ext.getfloat("u_min", 0.5), ext.getfloat("u_max", 2.0)),
            momentum_range=ext.getfloat("momentum_range", 1.0),
            name=cp["model"].get("name", "run"),
        )
        if cfg.m is None or cfg.c is None:
            raise ConfigError("[extension] needs m and c")
        if cp.has_section("G"):
            g = cp["G"]
            if "a" in g:
                cfg.a = _floats(g["a"])
            cfg.G_text = g.get("expr")
        if cp.has_section("potential"):
            p = cp["potential"]
            cfg.V_text = p.get("expr")
            cfg.potential = None if cfg.V_text else p.get("name", "free")
        if cp.has_section("verification"):
            v = cp["verification"]
            cfg.samples = v.getint("samples", cfg.samples)
            cfg.tol = v.getfloat("tol", cfg.tol)
            cfg.seed = v.getint("seed", cfg.seed)
            if "commutator_k" in v:
                cfg.commutator_k = tuple(int(x) for x in _floats(v["commutator_k"]))
            cfg.sabotage = v.getboolean("sabotage", cfg.sabotage)
            if "independence" in v:
                groups = []
                for item in v["independence"].split(";"):
                    if item.strip():
                        names, _, rank = item.partition(":")
                        groups.append((tuple(n.strip() for n in names.split(",")), int(rank)))
                cfg.independence = tuple(groups)
            for key in v:
                if key.startswith("expect_"):
                    cfg.expected[key[len("expect_"):]] = v[key]
        if cp.has_section("trajectory"):
            t = cp["trajectory"]
            if t.getboolean("enabled", True):
                cfg.trajectory = TrajectorySettings(
                    T=t.getfloat("T", 5.0),
                    dt=t.getfloat("dt", 1e-3),
                    x0=_pairs(t.get("x0", "")),
                    drift_tol=t.getfloat("drift_tol", 1e-6),
                    order_check=t.getboolean("order_check", True),
                )
        if cp.has_section("output"):
            cfg.out_dir = cp["output"].get("dir")
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg


# -- the five steps -------------------------------------------------------------

@dataclass
class RunArtifacts:
    config: PipelineConfig
    model: ExtendedModel
    base: Model
    report: VerificationReport
    golden: dict
    trajectory: object = None

    @property
    def passed(self) -> bool:
        return self.report.passed


def _chart_table(base: Model) -> dict:
    table = {v.name: v for v in base.chart.coordinates + base.chart.momenta}
    table.update({"u": U_VAR, "p_u": PU_VAR})
    return table


def _parse(text: str, table: Mapping, what: str) -> Expr:
    try:
        return parse_expr(text, table)
    except ParseError as exc:
        raise ConfigError(f"cannot parse {what}: {exc}") from exc


def check_curvature_match(cfg: PipelineConfig, base: Model, report: VerificationReport | None = None):
    """Step 1: the base curvature must equal ``m c``."""
    cls = classify_curvature(base.metric, samples=min(cfg.samples, 50), tol=cfg.tol, seed=cfg.seed)
    if report is not None:
        report.add(CheckRecord("curvature_constant", "residual", cls.constant, cls.max_residual, cfg.tol,
                               cls.samples, {"K": cls.K, "degenerate": cls.degenerate}))
    if not cls.constant:
        raise CurvatureMismatchError(f"{base.key} does not have constant curvature (residual {cls.max_residual:.3g})")
    if not cls.degenerate and abs(cfg.m * cfg.c - cls.K) > 1e-9:
        raise CurvatureMismatchError(
            f"m*c = {cfg.m * cfg.c:g} but {base.key} has constant curvature K = {cls.K:g}; "
            f"choose c = {cls.K / cfg.m:g} for m = {cfg.m}"
        )
    return cls


def build(cfg: PipelineConfig, report: VerificationReport | None = None) -> tuple[ExtendedModel, Model]:
    """Steps 1 to 5 without the dynamic checks; raises ConfigError/CurvatureMismatchError."""
    try:
        base = get_model(cfg.model)
    except UnknownModelError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    if base.stub:
        raise ConfigError(f"{base.key} is a curvature-check stub and cannot be extended")
    try:
        spec = cfg.spec
    except InvalidSpecError as exc:
        raise ConfigError(str(exc)) from exc
    check_curvature_match(cfg, base, report)
    table = _chart_table(base)
    box = base.chart.coordinate_box()

    # step 2: G
    basis = None
    if cfg.G_text:
        G = _parse(cfg.G_text, table, "G")
    else:
        basis = builtin_gbasis(base, cfg.m, cfg.c)
        if len(cfg.a) != len(basis):
            raise ConfigError(f"[G] a needs {len(basis)} coefficients for {base.key}")
        G = basis.combine(cfg.a)
    if G.has_momenta or (G.free & {U_VAR, PU_VAR}):
        raise ConfigError("G must depend on the base coordinates only")
    if report is not None:
        M = base.metric
        report.add(zero_record("hess_G", hess_residual(G, M, cfg.m, cfg.c), box, cfg.samples, cfg.tol, cfg.seed))
        report.add(zero_record("laplace_eigen_G", eigen_residual(G, M, cfg.m, cfg.c), box, cfg.samples, cfg.tol,
                               cfg.seed))
        if basis is not None:
            for label, g in zip(basis.labels or basis.parameters, basis.elements):
                report.add(zero_record(f"hess_basis[{label}]", hess_residual(g, M, cfg.m, cfg.c), box, cfg.samples,
                                       cfg.tol, cfg.seed))
                report.add(zero_record(f"laplace_eigen_basis[{label}]", eigen_residual(g, M, cfg.m, cfg.c), box,
                                       cfg.samples, cfg.tol, cfg.seed))
            rank, cond = gram_rank(basis, box, seed=cfg.seed)
            report.add(CheckRecord("gbasis_rank", "independence", rank == len(basis), rank, None, len(basis),
                                   {"expected": len(basis), "condition": cond}))

    # step 3: V
    extras = {}
    note = ""
    if cfg.V_text:
        V = _parse(cfg.V_text, table, "V")
    else:
        recipe = base.potentials.get(cfg.potential)
        if recipe is None:
            raise ConfigError(f"{base.key} has no potential {cfg.potential!r}; known: {', '.join(base.potentials)}")
        try:
            V = as_expr(recipe(base, cfg.m, cfg.c, cfg.L0, cfg.a))
        except IncompatibleCoefficientsError as exc:
            raise ConfigError(f"potential {cfg.potential}: {exc}") from exc
        note = recipe.description
        if recipe.integrals is not None:
            extras = recipe.integrals(base, cfg.m, cfg.c, cfg.L0, cfg.a)
    if V.has_momenta or (V.free & {U_VAR, PU_VAR}):
        raise ConfigError("V must depend on the base coordinates only")
    if report is not None:
        rec = zero_record("v_residual", v_residual(V, G, base.metric, cfg.m, cfg.c, cfg.L0), box, cfg.samples,
                          cfg.tol, cfg.seed)
        if note:
            rec.detail["potential"] = note
        report.add(rec)
        try:
            L0_fit, resid = check_e10_form(V, G, base.metric, cfg.m, cfg.c, box, samples=max(cfg.samples, 20),
                                           tol=cfg.tol, seed=cfg.seed)
            ok = abs(L0_fit - cfg.L0) <= 1e-6 * (1 + abs(cfg.L0))
            report.add(CheckRecord("E10_fitted_L0", "residual", ok, resid, cfg.tol, max(cfg.samples, 20),
                                   {"fitted_L0": L0_fit, "configured_L0": cfg.L0}))
        except IncompatiblePotentialError as exc:
            report.add(CheckRecord("E10_fitted_L0", "residual", False, exc.residual, cfg.tol, max(cfg.samples, 20),
                                   {"fitted_L0": exc.fitted_L0, "configured_L0": cfg.L0, "error": str(exc)}))

    # step 4: H
    L = natural_hamiltonian(base.metric, V)
    model = build_extended_hamiltonian(
        L, spec, base.chart, metric=base.metric, V=V, key=base.key, base_box=box,
        momentum_range=cfg.momentum_range, extra_integrals=dict(extras),
    )
    # step 5: F
    return model.with_G(G), base


def verify(cfg: PipelineConfig, model: ExtendedModel, base: Model, report: VerificationReport):
    """Dynamic part of the suite, appended to ``report``; returns the trajectory if one ran."""
    s, tol, seed = cfg.samples, cfg.tol, cfg.seed
    box = model.box
    report.add(zero_record("closed_form_H", hamiltonian_difference(model), box, s, tol, seed))
    deg = momentum_degree(model.F, model.momenta, box=box, tol=tol)
    report.add(CheckRecord("degree_F", "residual", deg == cfg.m, deg, None, s, {"expected": cfg.m}))
    report.extend(structural_checks(model, s, tol, seed))
    report.add(first_integral_residual(model, samples=s, tol=tol, seed=seed, fd_points=10))
    for name, I in model.extra_integrals.items():
        report.add(zero_record(f"bracket_L_{name}", poisson_bracket(model.L, I, model.space), box, s, tol, seed))
        report.add(zero_record(f"bracket_H_{name}", poisson_bracket(model.H, I, model.space), box, s, tol, seed))
    for k in cfg.commutator_k:
        report.extend(commutator_identity_check(model, k, s, tol, seed))
    if cfg.sabotage:
        report.extend(sabotage_checks(model, s, seed=seed))
    for key, text in sorted(cfg.expected.items()):
        target = {"F": model.F, "H": model.H, "G": model.G, "L": model.L}.get(key)
        if target is None:
            raise ConfigError(f"expect_{key}: only F, H, G and L can be compared")
        expected = expected_expression(text, model, base)
        report.add(zero_record(f"expected_{key}", target - expected, box, s, min(tol, 1e-10), seed))
    nonconstant_G = bool(model.G.free)
    if nonconstant_G:
        report.add(bracket_witness(model, seed=seed))
    groups = cfg.independence or ((("H", "L", "F"), 3),) if nonconstant_G else cfg.independence
    for names, expected in groups:
        report.add(independence_check(model, names, expected, seed=seed))
    traj = None
    if cfg.trajectory is not None:
        ts = cfg.trajectory
        x0 = dict(ts.x0)
        missing = [v.name for v in model.space.state_variables if v.name not in x0]
        if missing:
            raise ConfigError(f"[trajectory] x0 lacks {', '.join(missing)}")
        recs, traj = trajectory_checks(model, x0, ts.T, ts.dt, tol=ts.drift_tol, order_check=ts.order_check)
        report.extend(recs)
    return traj


def expected_expression(text: str, model: ExtendedModel, base: Model) -> Expr:
    """Parse a comparison target; the names ``L`` and ``V`` stand for the model's L and V."""
    table = _chart_table(base)
    Lv = Variable("L", VarKind.COORDINATE, 90)
    Vv = Variable("V", VarKind.COORDINATE, 91)
    table.update({"L": Lv, "V": Vv})
    e = _parse(text, table, "expected expression")
    return substitute(e, {Lv: model.L, Vv: model.V if model.V is not None else 0})


def golden_text(model: ExtendedModel) -> str:
    values = {
        "H": model.H, "F": model.F, "gamma": model.gamma, "alpha": model.alpha, "f": model.f,
        "G": model.G, "L": model.L, "V": model.V,
    }
    lines = [f"{k} = {format_expr(values[k])}" for k in GOLDEN_KEYS if values[k] is not None]
    return "\n".join(lines) + "\n"


def parse_golden(text: str, model: ExtendedModel | None = None, variables=None) -> dict:
    """Read ``name = expr`` lines written by :func:`golden_text`."""
    if variables is None and model is not None:
        variables = {v.name: v for v in model.space.state_variables}
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        k, _, v = line.partition(" = ")
        out[k.strip()] = parse_expr(v, variables)
    return out


def run_pipeline(cfg: PipelineConfig, verify_checks: bool = True) -> RunArtifacts:
    report = VerificationReport()
    model, base = build(cfg, report if verify_checks else None)
    traj = verify(cfg, model, base, report) if verify_checks else None
    return RunArtifacts(cfg, model, base, report, {"golden.txt": golden_text(model)}, traj)


def write_artifacts(art: RunArtifacts, out_dir: str | os.PathLike, report: bool = True, golden: bool = True,
                    trajectory: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if golden:
        for name, text in art.golden.items():
            p = out / name
            p.write_text(text, encoding="utf-8")
            written.append(p)
    if report:
        p = out / "report.jsonl"
        p.write_text(art.report.to_jsonl(), encoding="utf-8")
        written.append(p)
    if trajectory and art.trajectory is not None:
        p = out / "trajectory.csv"
        art.trajectory.write_csv(p)
        written.append(p)
    return written
