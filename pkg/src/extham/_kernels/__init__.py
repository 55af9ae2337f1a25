"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise (or when
``EXTHAM_PURE=1`` is set) the numpy/pure-Python ``_pure`` module is used.
Both expose ``eval_batch`` and ``rk4`` with identical semantics.
"""
from __future__ import annotations

import math
import os

from . import _pure

if os.environ.get("EXTHAM_PURE", "") not in ("", "0"):
    _backend = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _backend  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _backend = _pure
        BACKEND = "pure"

eval_batch = _backend.eval_batch
rk4 = _backend.rk4

OPCODES = {
    "const": _pure.CONST,
    "var": _pure.VAR,
    "add": _pure.ADD,
    "mul": _pure.MUL,
    "div": _pure.DIV,
    "powi": _pure.POWI,
    "sin": _pure.SIN,
    "cos": _pure.COS,
    "sinh": _pure.SINH,
    "cosh": _pure.COSH,
    "exp": _pure.EXP,
    "sqrt": _pure.SQRT,
    "S": _pure.SK,
    "C": _pure.CK,
}


def get_backend(name: str | None = None):
    """Return the kernel module by name (``"compiled"``/``"pure"``), default active one."""
    if name is None:
        return _backend
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _core  # type: ignore[attr-defined]

        return _core
    raise ValueError(f"unknown backend {name!r}")


def scalar_func(name: str, kappa, x: float) -> float:
    """Evaluate one primitive at a float; used for constant folding."""
    try:
        if name == "sqrt":
            return math.sqrt(x) if x >= 0 else math.nan
        if name in ("sin", "cos", "sinh", "cosh", "exp"):
            return getattr(math, name)(x)
        s = _pure._sk(kappa, x)
        co = _pure._ck(kappa, x)
    except OverflowError:
        return math.inf
    if name == "S":
        return s
    if name == "C":
        return co
    if name == "T":
        return s / co if co != 0 else math.inf
    if name == "CT":
        return co / s if s != 0 else math.inf
    raise ValueError(name)
