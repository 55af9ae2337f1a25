# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: SSA program evaluation and fixed-step RK4."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sinh, cosh, exp, sqrt, pow, fabs, isfinite

cnp.import_array()

cdef enum:
    CONST = 0
    VAR = 1
    ADD = 2
    MUL = 3
    DIV = 4
    POWI = 5
    SIN = 6
    COS = 7
    SINH = 8
    COSH = 9
    EXP = 10
    SQRT = 11
    SK = 12
    CK = 13


cdef inline double _sk(double k, double x) nogil:
    cdef double s
    if k > 0:
        s = sqrt(k)
        return sin(s * x) / s
    if k < 0:
        s = sqrt(-k)
        return sinh(s * x) / s
    return x


cdef inline double _ck(double k, double x) nogil:
    if k > 0:
        return cos(sqrt(k) * x)
    if k < 0:
        return cosh(sqrt(-k) * x)
    return 1.0


cdef int _run(const int[::1] op, const int[::1] a, const int[::1] b, const double[::1] c,
              const double* x, double* regs, double* scale) noexcept nogil:
    """Fill ``regs``; returns 0 on success, 1 on a domain failure."""
    cdef Py_ssize_t i, n = op.shape[0]
    cdef double r, v, d, mx = 0.0
    cdef int o
    for i in range(n):
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
                return 1
            r = regs[a[i]] / d
        elif o == POWI:
            v = regs[a[i]]
            if v == 0.0 and c[i] < 0:
                return 1
            r = pow(v, c[i])
        else:
            v = regs[a[i]]
            if o == SIN:
                r = sin(v)
            elif o == COS:
                r = cos(v)
            elif o == SINH:
                r = sinh(v)
            elif o == COSH:
                r = cosh(v)
            elif o == EXP:
                r = exp(v)
            elif o == SQRT:
                if v < 0.0:
                    return 1
                r = sqrt(v)
            elif o == SK:
                r = _sk(c[i], v)
            elif o == CK:
                r = _ck(c[i], v)
            else:
                return 1
        if not isfinite(r):
            return 1
        regs[i] = r
        if fabs(r) > mx:
            mx = fabs(r)
    scale[0] = mx
    return 0


def eval_batch(const int[::1] op, const int[::1] a, const int[::1] b, const double[::1] c,
               const int[::1] outs, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t npts = Xv.shape[0], nout = outs.shape[0], n = op.shape[0]
    cdef Py_ssize_t p, j
    vals_arr = np.full((npts, nout), np.nan)
    scale_arr = np.full(npts, np.inf)
    ok_arr = np.zeros(npts, dtype=np.uint8)
    cdef double[:, ::1] vals = vals_arr
    cdef double[::1] scale = scale_arr
    cdef unsigned char[::1] ok = ok_arr
    cdef double[::1] regs = np.zeros(max(n, 1))
    cdef double sc
    with nogil:
        for p in range(npts):
            if _run(op, a, b, c, &Xv[p, 0] if Xv.shape[1] > 0 else NULL, &regs[0], &sc) == 0:
                scale[p] = sc
                ok[p] = 1
                for j in range(nout):
                    vals[p, j] = regs[outs[j]]
    return vals_arr, scale_arr, ok_arr


def rk4(const int[::1] op, const int[::1] a, const int[::1] b, const double[::1] c,
        const int[::1] outs, x0, double dt, long nsteps, long stride):
    cdef Py_ssize_t dim = outs.shape[0], n = op.shape[0], i
    cdef long step, done = 0, nrec = nsteps // stride + 1, rec = 1
    traj_arr = np.empty((nrec, dim))
    cdef double[:, ::1] traj = traj_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.empty(dim)
    cdef double[::1] k1 = np.empty(dim)
    cdef double[::1] k2 = np.empty(dim)
    cdef double[::1] k3 = np.empty(dim)
    cdef double[::1] k4 = np.empty(dim)
    cdef double[::1] regs = np.zeros(max(n, 1))
    cdef double sc, h = dt
    for i in range(dim):
        traj[0, i] = x[i]
    with nogil:
        for step in range(nsteps):
            if _run(op, a, b, c, &x[0], &regs[0], &sc):
                break
            for i in range(dim):
                k1[i] = regs[outs[i]]
                y[i] = x[i] + 0.5 * h * k1[i]
            if _run(op, a, b, c, &y[0], &regs[0], &sc):
                break
            for i in range(dim):
                k2[i] = regs[outs[i]]
                y[i] = x[i] + 0.5 * h * k2[i]
            if _run(op, a, b, c, &y[0], &regs[0], &sc):
                break
            for i in range(dim):
                k3[i] = regs[outs[i]]
                y[i] = x[i] + h * k3[i]
            if _run(op, a, b, c, &y[0], &regs[0], &sc):
                break
            for i in range(dim):
                k4[i] = regs[outs[i]]
                x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            done = step + 1
            if done % stride == 0:
                for i in range(dim):
                    traj[rec, i] = x[i]
                rec += 1
    return traj_arr[:rec], done
