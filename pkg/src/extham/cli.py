"""Command-line entry point (``extham``).

Exit status: 0 when every enabled check passes, 1 on a failed check, 2 on a
configuration or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .models import UnknownModelError, describe_model, list_models
from .pipeline import ConfigError, load_config, run_pipeline, write_artifacts
from .structure import CurvatureMismatchError
from .symexpr import ExpressionError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extham", description="Build and verify extended Hamiltonians.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, out=True):
        sp.add_argument("--config", required=True, help="INI pipeline config")
        sp.add_argument("--seed", type=int, help="override [verification] seed")
        sp.add_argument("--samples", type=int, help="override [verification] samples")
        sp.add_argument("--tol", type=float, help="override [verification] tol")
        if out:
            sp.add_argument("--out-dir", help="directory for report.jsonl, golden.txt and trajectory.csv")

    run = sub.add_parser("run", help="build, verify and write artifacts")
    with_config(run)
    run.add_argument("--trajectory", action="store_true", help="force the trajectory run (needs [trajectory] x0)")
    run.add_argument("--no-trajectory", action="store_true", help="skip the trajectory run")

    vo = sub.add_parser("verify-only", help="build and verify; print the report, write nothing")
    with_config(vo, out=False)
    vo.add_argument("--trajectory", action="store_true", help="force the trajectory run")
    vo.add_argument("--no-trajectory", action="store_true", help="skip the trajectory run")

    eg = sub.add_parser("emit-golden", help="write H, F, gamma, alpha, f as expression text")
    with_config(eg)

    sub.add_parser("list-models", help="list registry keys")
    d = sub.add_parser("describe", help="show registry metadata for one model")
    d.add_argument("model")
    return p


def _load(args):
    cfg = load_config(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "samples", "tol") if getattr(args, k, None) is not None}
    cfg = replace(cfg, **overrides)
    if getattr(args, "no_trajectory", False):
        cfg = replace(cfg, trajectory=None)
    elif getattr(args, "trajectory", False) and cfg.trajectory is None:
        raise ConfigError("--trajectory needs a [trajectory] section with x0")
    return cfg


def _out_dir(args, cfg) -> str:
    d = getattr(args, "out_dir", None) or cfg.out_dir
    if not d:
        raise ConfigError("no output directory: pass --out-dir or set [output] dir")
    return d


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list-models":
            for key in list_models():
                info = describe_model(key)
                K = "any" if info["K"] is None else f"{info['K']:g}"
                stub = " (stub)" if info["stub"] else ""
                print(f"{key}\tn={info['n']}\tK={K}{stub}")
            return EXIT_OK
        if args.command == "describe":
            print(json.dumps(describe_model(args.model), indent=2, sort_keys=True))
            return EXIT_OK
        cfg = _load(args)
        if args.command == "emit-golden":
            out = _out_dir(args, cfg)
            art = run_pipeline(cfg, verify_checks=False)
            for p in write_artifacts(art, out, report=False, trajectory=False):
                print(p)
            return EXIT_OK
        art = run_pipeline(cfg)
        print(art.report.summary())
        if args.command == "run":
            out = _out_dir(args, cfg)
            for p in write_artifacts(art, out):
                print(p)
        return EXIT_OK if art.passed else EXIT_FAIL
    except (ConfigError, CurvatureMismatchError, UnknownModelError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (ExpressionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
