"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--steps 5000] [--points 20000] [--repeat 3]

Times batch evaluation of the pseudosphere m = 2 integrals and an RK4 run of
its Hamiltonian vector field, once per available backend.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from extham import _kernels
from extham.phase import hamiltonian_vector_field
from extham.pipeline import build, load_config
from extham.symexpr import compile_exprs

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "ex2_pseudosphere_m2.cfg"


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=5000, help="RK4 steps (dt = 1e-3)")
    ap.add_argument("--points", type=int, default=20000, help="points for batch evaluation")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = load_config(CONFIG)
    model, _ = build(cfg)
    sv = model.space.state_variables
    field = compile_exprs(hamiltonian_vector_field(model.H, model.space), sv)
    integrals = compile_exprs([model.H, model.L, model.F], sv)
    x0 = np.array([cfg.trajectory.x0[v.name] for v in sv])
    X = model.box.sample_random(args.points, seed=0)

    backends = ["pure"]
    try:
        _kernels.get_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled backend unavailable; timing the pure-Python kernels only")

    results = {}
    for name in backends:
        k = _kernels.get_backend(name)
        p = integrals
        t_eval = best_of(lambda: k.eval_batch(p.op, p.a, p.b, p.c, p.outputs, X), args.repeat)
        f = field
        t_rk4 = best_of(lambda: k.rk4(f.op, f.a, f.b, f.c, f.outputs, x0, 1e-3, args.steps, 1), args.repeat)
        results[name] = (t_eval, t_rk4)

    print(f"{'backend':<10} {'eval_batch (s)':>15} {'rk4 (s)':>10}")
    for name, (te, tr) in results.items():
        print(f"{name:<10} {te:>15.4f} {tr:>10.4f}")
    if len(results) == 2:
        (ce, cr), (pe, pr) = results["compiled"], results["pure"]
        print(f"speed-up   {pe / ce:>14.1f}x {pr / cr:>9.1f}x")


if __name__ == "__main__":
    main()
