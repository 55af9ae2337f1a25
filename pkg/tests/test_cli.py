import json
import subprocess
import sys

import pytest

from extham.cli import main
from extham.pipeline import parse_golden
from extham.symexpr import numeric_zero_test

from conftest import CONFIGS, built, config_path

SPHERE = config_path("ex2_sphere").read_text()


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list_models(capsys):
    assert main(["list-models"]) == 0
    out = capsys.readouterr().out
    keys = [line.split("\t")[0] for line in out.splitlines()]
    assert {"line1", "euclidean2", "sphere2", "pseudosphere2", "hopf_s3"} <= set(keys)


def test_describe(capsys):
    assert main(["describe", "sphere2"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["K"] == 1.0 and info["n"] == 2


def test_describe_unknown_model(capsys):
    assert main(["describe", "bogus"]) == 2
    assert "bogus" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_verify(cfg, capsys):
    assert main(["verify-only", "--config", str(cfg), "--no-trajectory"]) == 0
    assert "checks passed" in capsys.readouterr().out


def test_run_writes_deterministic_artifacts(tmp_path):
    cfg = str(config_path("ex2_pseudosphere_m2"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out-dir", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out-dir", str(b)]) == 0
    for name in ("report.jsonl", "golden.txt", "trajectory.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    rows = [json.loads(s) for s in (a / "report.jsonl").read_text().splitlines()]
    assert all(r["pass"] for r in rows)
    assert {"first_integral", "drift_H", "order_F"} <= {r["name"] for r in rows}


def test_seed_override_changes_samples(tmp_path):
    cfg = str(config_path("ex2_sphere"))
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "a"), "--seed", "3"]) == 0
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.jsonl").read_text() != (tmp_path / "b" / "report.jsonl").read_text()


def test_emit_golden_roundtrip(tmp_path):
    assert main(["emit-golden", "--config", str(config_path("ex2_pseudosphere_m1")), "--out-dir", str(tmp_path)]) == 0
    model = built("ex2_pseudosphere_m1")[0]
    golden = parse_golden((tmp_path / "golden.txt").read_text(), model)
    assert {"H", "F", "gamma", "alpha", "f"} <= set(golden)
    for key, expr in (("H", model.H), ("F", model.F), ("gamma", model.gamma)):
        assert numeric_zero_test(golden[key] - expr, model.box).is_zero, key
    assert not (tmp_path / "report.jsonl").exists()


def test_empty_config(tmp_path, capsys):
    assert main(["verify-only", "--config", write_cfg(tmp_path, "")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["verify-only", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_curvature_mismatch(tmp_path, capsys):
    text = SPHERE.replace("m = 1", "m = 2")
    assert main(["verify-only", "--config", write_cfg(tmp_path, text)]) == 2
    assert "curvature" in capsys.readouterr().err.lower()


def test_bad_expression(tmp_path):
    text = SPHERE + "\nexpect_H = p_u +\n"
    assert main(["verify-only", "--config", write_cfg(tmp_path, text)]) == 2


def test_failing_check_exits_one(tmp_path, capsys):
    text = SPHERE.replace("expect_F = ", "expect_F = p_u + ")
    assert main(["verify-only", "--config", write_cfg(tmp_path, text)]) == 1
    assert "[FAIL] expected_F" in capsys.readouterr().out


def test_run_without_out_dir(tmp_path):
    assert main(["run", "--config", str(config_path("ex2_sphere"))]) == 2


def test_forced_trajectory_needs_section():
    assert main(["verify-only", "--config", str(config_path("ex2_sphere")), "--trajectory"]) == 2


def test_console_script_module():
    r = subprocess.run([sys.executable, "-m", "extham.cli", "list-models"], capture_output=True, text=True)
    assert r.returncode == 0 and "sphere2" in r.stdout
