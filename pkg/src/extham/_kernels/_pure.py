"""Pure-Python/numpy implementation of the program kernels.

Semantics must match ``_core.pyx`` exactly; ``tests/test_kernels.py`` checks
both against each other.
"""
from __future__ import annotations

import math

import numpy as np

CONST, VAR, ADD, MUL, DIV, POWI, SIN, COS, SINH, COSH, EXP, SQRT, SK, CK = range(14)


def _sk(k, x):
    if k > 0:
        s = math.sqrt(k)
        return math.sin(s * x) / s
    if k < 0:
        s = math.sqrt(-k)
        return math.sinh(s * x) / s
    return x


def _ck(k, x):
    if k > 0:
        return math.cos(math.sqrt(k) * x)
    if k < 0:
        return math.cosh(math.sqrt(-k) * x)
    return 1.0


def _sk_vec(k, x):
    if k > 0:
        s = math.sqrt(k)
        return np.sin(s * x) / s
    if k < 0:
        s = math.sqrt(-k)
        return np.sinh(s * x) / s
    return x.copy()


def _ck_vec(k, x):
    if k > 0:
        return np.cos(math.sqrt(k) * x)
    if k < 0:
        return np.cosh(math.sqrt(-k) * x)
    return np.ones_like(x)


def eval_batch(op, a, b, c, outs, X):
    """Evaluate the SSA program at every row of ``X``.

    Returns ``(values[npts, nout], scale[npts], ok[npts])`` where ``scale`` is
    the largest magnitude of any intermediate register and ``ok`` is false
    where some register went non-finite.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    npts = X.shape[0]
    n = len(op)
    regs = [None] * n
    scale = np.zeros(npts)
    with np.errstate(all="ignore"):
        for i in range(n):
            o = op[i]
            if o == CONST:
                r = np.full(npts, c[i])
            elif o == VAR:
                r = X[:, a[i]].copy()
            elif o == ADD:
                r = regs[a[i]] + regs[b[i]]
            elif o == MUL:
                r = regs[a[i]] * regs[b[i]]
            elif o == DIV:
                r = regs[a[i]] / regs[b[i]]
            elif o == POWI:
                r = np.power(regs[a[i]], float(int(c[i])))
            elif o == SIN:
                r = np.sin(regs[a[i]])
            elif o == COS:
                r = np.cos(regs[a[i]])
            elif o == SINH:
                r = np.sinh(regs[a[i]])
            elif o == COSH:
                r = np.cosh(regs[a[i]])
            elif o == EXP:
                r = np.exp(regs[a[i]])
            elif o == SQRT:
                r = np.sqrt(regs[a[i]])
            elif o == SK:
                r = _sk_vec(c[i], regs[a[i]])
            elif o == CK:
                r = _ck_vec(c[i], regs[a[i]])
            else:
                raise ValueError(f"bad opcode {o}")
            regs[i] = r
            np.fmax(scale, np.abs(r), out=scale)
    ok = np.isfinite(scale)
    vals = np.empty((npts, len(outs)))
    for j, k in enumerate(outs):
        vals[:, j] = regs[k]
    ok &= np.all(np.isfinite(vals), axis=1)
    # fmax ignores NaN, so re-check every register
    for r in regs:
        ok &= np.isfinite(r)
    return vals, scale, ok.astype(np.uint8)


def _eval_point(op, a, b, c, outs, x, regs):
    for i in range(len(op)):
        o = op[i]
        if o == CONST:
            r = c[i]
        elif o == VAR:
            r = x[a[i]]
        elif o == ADD:
            r = regs[a[i]] + regs[b[i]]
        elif o == MUL:
            r = regs[a[i]] * regs[b[i]]
        elif o == DIV:
            d = regs[b[i]]
            if d == 0.0:
                return None
            r = regs[a[i]] / d
        elif o == POWI:
            base = regs[a[i]]
            k = int(c[i])
            if base == 0.0 and k < 0:
                return None
            try:
                r = base**k
            except OverflowError:
                return None
        else:
            v = regs[a[i]]
            try:
                if o == SIN:
                    r = math.sin(v)
                elif o == COS:
                    r = math.cos(v)
                elif o == SINH:
                    r = math.sinh(v)
                elif o == COSH:
                    r = math.cosh(v)
                elif o == EXP:
                    r = math.exp(v)
                elif o == SQRT:
                    if v < 0.0:
                        return None
                    r = math.sqrt(v)
                elif o == SK:
                    r = _sk(c[i], v)
                elif o == CK:
                    r = _ck(c[i], v)
                else:
                    raise ValueError(f"bad opcode {o}")
            except (OverflowError, ValueError):
                return None
        if not math.isfinite(r):
            return None
        regs[i] = r
    return [regs[k] for k in outs]


def rk4(op, a, b, c, outs, x0, dt, nsteps, stride):
    """Classical RK4 for dx/dt = program(x); records every ``stride`` steps.

    Returns ``(trajectory[nrec, dim], steps_done)``; stops early when the
    vector field leaves the real domain.
    """
    op = [int(v) for v in op]
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    c = [float(v) for v in c]
    outs = [int(v) for v in outs]
    x = [float(v) for v in x0]
    dim = len(x)
    regs = [0.0] * len(op)
    rows = [list(x)]
    h = float(dt)
    done = 0
    for step in range(int(nsteps)):
        k1 = _eval_point(op, a, b, c, outs, x, regs)
        if k1 is None:
            break
        y = [x[i] + 0.5 * h * k1[i] for i in range(dim)]
        k2 = _eval_point(op, a, b, c, outs, y, regs)
        if k2 is None:
            break
        y = [x[i] + 0.5 * h * k2[i] for i in range(dim)]
        k3 = _eval_point(op, a, b, c, outs, y, regs)
        if k3 is None:
            break
        y = [x[i] + h * k3[i] for i in range(dim)]
        k4 = _eval_point(op, a, b, c, outs, y, regs)
        if k4 is None:
            break
        x = [x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(dim)]
        done = step + 1
        if done % stride == 0:
            rows.append(list(x))
    return np.array(rows, dtype=np.float64).reshape(-1, dim), done
