"""Elementary functions accepting either floats or truncated polynomials.

Equations of motion are written once against these helpers and run on
both scalar types.
"""
from __future__ import annotations

import math

from .poly import TruncatedPolynomial

_TP = TruncatedPolynomial


def sin(x):
    return x.sin() if isinstance(x, _TP) else math.sin(x)


def cos(x):
    return x.cos() if isinstance(x, _TP) else math.cos(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, _TP) else math.sqrt(x)


def exp(x):
    return x.exp() if isinstance(x, _TP) else math.exp(x)


def log(x):
    return x.log() if isinstance(x, _TP) else math.log(x)


def atan(x):
    return x.atan() if isinstance(x, _TP) else math.atan(x)


def atan2(y, x):
    if isinstance(y, _TP):
        return y.atan2(x)
    if isinstance(x, _TP):
        return _TP.constant(x.ctx, y).atan2(x)
    return math.atan2(y, x)


def cons(x) -> float:
    """Constant part (the value itself for floats)."""
    return x.cons if isinstance(x, _TP) else float(x)
