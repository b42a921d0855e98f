"""Adaptive explicit Runge-Kutta 8(7) integration for float and DA states.

The Prince-Dormand 13-stage pair advances the 8th-order solution; the step
size is controlled by the max-norm of the embedded error of the constant
parts.  DA states are lists of :class:`TruncatedPolynomial` over one
context; the stage combinations work directly on the coefficient arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as Fr
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .da.poly import TruncatedPolynomial
from .errors import IntegrationError

# -- Butcher tableau ----------------------------------------------------------

_C = [Fr(0), Fr(1, 18), Fr(1, 12), Fr(1, 8), Fr(5, 16), Fr(3, 8), Fr(59, 400), Fr(93, 200),
      Fr(5490023248, 9719169821), Fr(13, 20), Fr(1201146811, 1299019798), Fr(1), Fr(1)]

_A = {
    (1, 0): Fr(1, 18),
    (2, 0): Fr(1, 48), (2, 1): Fr(1, 16),
    (3, 0): Fr(1, 32), (3, 2): Fr(3, 32),
    (4, 0): Fr(5, 16), (4, 2): Fr(-75, 64), (4, 3): Fr(75, 64),
    (5, 0): Fr(3, 80), (5, 3): Fr(3, 16), (5, 4): Fr(3, 20),
    (6, 0): Fr(29443841, 614563906), (6, 3): Fr(77736538, 692538347),
    (6, 4): Fr(-28693883, 1125000000), (6, 5): Fr(23124283, 1800000000),
    (7, 0): Fr(16016141, 946692911), (7, 3): Fr(61564180, 158732637),
    (7, 4): Fr(22789713, 633445777), (7, 5): Fr(545815736, 2771057229),
    (7, 6): Fr(-180193667, 1043307555),
    (8, 0): Fr(39632708, 573591083), (8, 3): Fr(-433636366, 683701615),
    (8, 4): Fr(-421739975, 2616292301), (8, 5): Fr(100302831, 723423059),
    (8, 6): Fr(790204164, 839813087), (8, 7): Fr(800635310, 3783071287),
    (9, 0): Fr(246121993, 1340847787), (9, 3): Fr(-37695042795, 15268766246),
    (9, 4): Fr(-309121744, 1061227803), (9, 5): Fr(-12992083, 490766935),
    (9, 6): Fr(6005943493, 2108947869), (9, 7): Fr(393006217, 1396673457),
    (9, 8): Fr(123872331, 1001029789),
    (10, 0): Fr(-1028468189, 846180014), (10, 3): Fr(8478235783, 508512852),
    (10, 4): Fr(1311729495, 1432422823), (10, 5): Fr(-10304129995, 1701304382),
    (10, 6): Fr(-48777925059, 3047939560), (10, 7): Fr(15336726248, 1032824649),
    (10, 8): Fr(-45442868181, 3398467696), (10, 9): Fr(3065993473, 597172653),
    (11, 0): Fr(185892177, 718116043), (11, 3): Fr(-3185094517, 667107341),
    (11, 4): Fr(-477755414, 1098053517), (11, 5): Fr(-703635378, 230739211),
    (11, 6): Fr(5731566787, 1027545527), (11, 7): Fr(5232866602, 850066563),
    (11, 8): Fr(-4093664535, 808688257), (11, 9): Fr(3962137247, 1805957418),
    (11, 10): Fr(65686358, 487910083),
    (12, 0): Fr(403863854, 491063109), (12, 3): Fr(-5068492393, 434740067),
    (12, 4): Fr(-411421997, 543043805), (12, 5): Fr(652783627, 914296604),
    (12, 6): Fr(11173962825, 925320556), (12, 7): Fr(-13158990841, 6184727034),
    (12, 8): Fr(3936647629, 1978049680), (12, 9): Fr(-160528059, 685178525),
    (12, 10): Fr(248638103, 1413531060),
}

_B8 = [Fr(14005451, 335480064), 0, 0, 0, 0, Fr(-59238493, 1068277825),
       Fr(181606767, 758867731), Fr(561292985, 797845732), Fr(-1041891430, 1371343529),
       Fr(760417239, 1151165299), Fr(118820643, 751138087), Fr(-528747749, 2220607170),
       Fr(1, 4)]
_B7 = [Fr(13451932, 455176623), 0, 0, 0, 0, Fr(-808719846, 976000145),
       Fr(1757004468, 5645159321), Fr(656045339, 265891186), Fr(-3867574721, 1518517206),
       Fr(465885868, 322736535), Fr(53011238, 667516719), Fr(2, 45), 0]

C = [float(x) for x in _C]
B8 = [float(x) for x in _B8]
B7 = [float(x) for x in _B7]
DB = [float(Fr(a) - Fr(b)) for a, b in zip(_B8, _B7)]
A_ROWS: list[list[tuple[int, float]]] = [
    [(j, float(_A[(i, j)])) for j in range(i) if (i, j) in _A] for i in range(13)
]
_A_IDX = [np.array([j for j, _ in row], dtype=np.intp) for row in A_ROWS]
_A_VAL = [np.array([a for _, a in row]) for row in A_ROWS]
_B8_ARR = np.array(B8)
_DB_ARR = np.array(DB)


def tableau_residuals() -> dict[str, float]:
    """Exact consistency checks of the tableau (all should be zero)."""
    row_sum = max(abs(sum(_A.get((i, j), 0) for j in range(i)) - _C[i]) for i in range(13))
    return {
        "row_sums": float(row_sum),
        "b8_sum": float(abs(sum(Fr(b) for b in _B8) - 1)),
        "b7_sum": float(abs(sum(Fr(b) for b in _B7) - 1)),
    }


# -- configuration and statistics --------------------------------------------


@dataclass
class IntegratorConfig:
    """Step control settings.

    ``da_error`` selects the error norm for polynomial states: ``"constant"``
    measures the constant parts only, ``"full"`` every coefficient (much
    smaller steps; for checking high-order coefficients).
    """

    abs_tol: float = 1e-12
    h_init: float | None = None
    h_min: float = 1e-13
    max_steps: int = 1_000_000
    safety: float = 0.9
    fac_min: float = 0.1
    fac_max: float = 4.0
    da_error: str = "constant"

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise ValueError("abs_tol must be positive")
        if self.da_error not in ("constant", "full"):
            raise ValueError("da_error must be 'constant' or 'full'")


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0

    def add(self, other: "StepStats") -> "StepStats":
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.rhs_evals += other.rhs_evals
        return self


@dataclass
class IntegrationResult:
    y: list
    s: float
    h_next: float
    stats: StepStats = field(default_factory=StepStats)


# -- single steps -----------------------------------------------------------


def _da_step(rhs, s: float, Y: np.ndarray, h: float, ctx,
             full: bool = False) -> tuple[np.ndarray, float]:
    n, size = Y.shape
    K = np.empty((13, n, size))
    wrap = TruncatedPolynomial._wrap
    K[0] = _as_coef(rhs(s, [wrap(ctx, Y[q].copy()) for q in range(n)]), ctx)
    for i in range(1, 13):
        Yi = Y + h * np.tensordot(_A_VAL[i], K[_A_IDX[i]], axes=1)
        K[i] = _as_coef(rhs(s + C[i] * h, [wrap(ctx, Yi[q]) for q in range(n)]), ctx)
    Ynew = Y + h * np.tensordot(_B8_ARR, K, axes=1)
    if full:
        err = float(np.max(np.abs(h * np.tensordot(_DB_ARR, K, axes=1))))
    else:
        err = float(np.max(np.abs(h * (_DB_ARR @ K[:, :, 0]))))
    return Ynew, err


def _as_coef(vals, ctx) -> np.ndarray:
    out = np.zeros((len(vals), ctx.size))
    for q, v in enumerate(vals):
        if isinstance(v, TruncatedPolynomial):
            out[q] = v.c
        else:
            out[q, 0] = v
    return out


def step(rhs, s: float, y, h: float):
    """One RK8(7) step; returns ``(y_new, err)``.  Floats or DA lists."""
    ctx = _da_context(y)
    if ctx is None:
        return _kernels.rk87_step(rhs, s, [float(v) for v in y], h, C, A_ROWS, B8, DB)
    Ynew, err = _da_step(rhs, s, _stack(y, ctx), h, ctx)
    return _unstack(Ynew, ctx), err


def _da_context(y):
    for v in y:
        if isinstance(v, TruncatedPolynomial):
            return v.ctx
    return None


def _stack(y, ctx) -> np.ndarray:
    return _as_coef(y, ctx)


def _unstack(Y: np.ndarray, ctx) -> list:
    return [TruncatedPolynomial._wrap(ctx, Y[q].copy()) for q in range(Y.shape[0])]


# -- driver -------------------------------------------------------------------


class _Stepper:
    """Adaptive stepping on either representation, kept in a raw form."""

    def __init__(self, rhs, y0, config: IntegratorConfig):
        self.rhs = rhs
        self.cfg = config
        self.ctx = _da_context(y0)
        if self.ctx is None:
            self.y = [float(v) for v in y0]
        else:
            self.y = _stack(y0, self.ctx)
        self.stats = StepStats()

    def try_step(self, s, h):
        if self.ctx is None:
            y_new, err = _kernels.rk87_step(self.rhs, s, self.y, h, C, A_ROWS, B8, DB)
        else:
            y_new, err = _da_step(self.rhs, s, self.y, h, self.ctx,
                                  self.cfg.da_error == "full")
        self.stats.rhs_evals += 13
        return y_new, err

    def factor(self, err: float) -> float:
        c = self.cfg
        if err == 0.0:
            return c.fac_max
        return min(c.fac_max, max(c.fac_min, c.safety * (c.abs_tol / err) ** 0.125))

    def values(self, y=None) -> list:
        y = self.y if y is None else y
        return list(y) if self.ctx is None else _unstack(y, self.ctx)

    def constants(self, y=None) -> np.ndarray:
        y = self.y if y is None else y
        return np.asarray(y, dtype=float) if self.ctx is None else y[:, 0].copy()

    def advance(self, s: float, s_end: float, h: float) -> tuple[float, float]:
        """Step from ``s`` to exactly ``s_end``; returns (s_end, suggested h)."""
        direction = 1.0 if s_end >= s else -1.0
        h = math.copysign(abs(h), direction)
        steps = 0
        while (s_end - s) * direction > 0.0:
            last = (s + h - s_end) * direction >= 0.0
            h_try = s_end - s if last else h
            y_new, err = self.try_step(s, h_try)
            if not math.isfinite(err):
                err = math.inf
            if err <= self.cfg.abs_tol:
                self.y = y_new
                s = s_end if last else s + h_try
                self.stats.accepted += 1
                if not last or abs(h_try) >= abs(h) * 0.999:
                    h = h_try * self.factor(err)
            else:
                self.stats.rejected += 1
                h = h_try * self.factor(err)
                if abs(h) < self.cfg.h_min:
                    raise IntegrationError(f"step size underflow at s = {s:.6e}")
            steps += 1
            if steps > self.cfg.max_steps:
                raise IntegrationError("maximum number of steps exceeded")
        return s, h


def _initial_h(s0, s1, config: IntegratorConfig) -> float:
    if config.h_init is not None:
        return config.h_init
    return (s1 - s0) / 64.0 if s1 != s0 else 1e-3


def integrate(rhs: Callable, y0: Sequence, s0: float, s1: float,
              config: IntegratorConfig | None = None, h: float | None = None) -> IntegrationResult:
    """Integrate ``dy/ds = rhs(s, y)`` from ``s0`` to ``s1``."""
    cfg = config or IntegratorConfig()
    st = _Stepper(rhs, y0, cfg)
    h = _initial_h(s0, s1, cfg) if h is None else h
    s, h = st.advance(s0, s1, h)
    return IntegrationResult(st.values(), s, h, st.stats)


def integrate_points(rhs: Callable, y0: Sequence, s0: float, points: Sequence[float],
                     config: IntegratorConfig | None = None,
                     callback: Callable[[int, float, list], None] | None = None,
                     ) -> tuple[list[list], StepStats]:
    """States at each of the increasing ``points`` (step size carried over)."""
    cfg = config or IntegratorConfig()
    st = _Stepper(rhs, y0, cfg)
    out = []
    s = s0
    h = _initial_h(s0, points[0], cfg) if len(points) else 0.0
    for k, p in enumerate(points):
        s, h = st.advance(s, p, h)
        vals = st.values()
        out.append(vals)
        if callback is not None:
            callback(k, s, vals)
    return out, st.stats


# -- events -------------------------------------------------------------------


@dataclass
class EventResult:
    s: float
    y: list
    stats: StepStats
    h_next: float


def _hermite_root(g0, d0, g1, d1, h) -> float:
    """Root in [0, 1] of the cubic Hermite interpolant, fallback: secant."""
    coeffs = [2 * g0 - 2 * g1 + h * (d0 + d1), -3 * g0 + 3 * g1 - h * (2 * d0 + d1), h * d0, g0]
    roots = [r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-12 and -1e-9 <= r.real <= 1 + 1e-9]
    if roots:
        return float(min(max(min(roots), 0.0), 1.0))
    return g0 / (g0 - g1)


def integrate_to_event(rhs: Callable, y0: Sequence, s0: float, index: int,
                       direction: int = 1, s_max: float | None = None,
                       config: IntegratorConfig | None = None, h: float | None = None,
                       tol: float = 1e-12, skip_start: bool = True) -> EventResult:
    """Integrate until state component ``index`` crosses zero in ``direction``.

    The crossing is bracketed on accepted steps, a Hermite cubic gives the
    first guess and Newton iterations with RK sub-steps from the bracket
    start refine it to ``|y[index]| <= tol``.  Float states only.
    """
    cfg = config or IntegratorConfig()
    st = _Stepper(rhs, y0, cfg)
    if st.ctx is not None:
        raise TypeError("event location works on float states")
    s = s0
    h = _initial_h(s0, s0 + 1.0, cfg) if h is None else h
    g_prev = st.y[index]
    d_prev = rhs(s, st.y)[index]
    first = True
    while True:
        if s_max is not None and s >= s_max:
            raise IntegrationError("no event before s_max")
        h_try = h if s_max is None else min(h, s_max - s)
        y_new, err = st.try_step(s, h_try)
        if not math.isfinite(err):
            err = math.inf
        h = h_try * st.factor(err)
        if err > cfg.abs_tol:
            st.stats.rejected += 1
            if abs(h) < cfg.h_min:
                raise IntegrationError(f"step size underflow at s = {s:.6e}")
            continue
        st.stats.accepted += 1
        y_a, s_a = st.y, s
        st.y = y_new
        s = s + h_try
        g = st.y[index]
        d = rhs(s, st.y)[index]
        st.stats.rhs_evals += 1
        crossed = (g_prev < 0.0 <= g) if direction > 0 else (g_prev > 0.0 >= g)
        if first and skip_start and abs(g_prev) <= tol:
            crossed = False
        first = False
        if crossed:
            break
        g_prev, d_prev = g, d
        if st.stats.accepted > cfg.max_steps:
            raise IntegrationError("no event within the step budget")
    span = s - s_a
    tau = _hermite_root(g_prev, d_prev, g, d, span)
    sk = s_a + tau * span
    yk = st.y
    for _ in range(50):
        if sk == s_a:
            yk = y_a
        else:
            yk, _err = _kernels.rk87_step(rhs, s_a, y_a, sk - s_a, C, A_ROWS, B8, DB)
            st.stats.rhs_evals += 13
        gk = yk[index]
        if abs(gk) <= tol:
            break
        dk = rhs(sk, yk)[index]
        st.stats.rhs_evals += 1
        if dk == 0.0:
            raise IntegrationError("event function has zero rate at the crossing")
        sk = sk - gk / dk
    else:
        raise IntegrationError("event Newton iteration did not converge")
    return EventResult(sk, list(yk), st.stats, h)
