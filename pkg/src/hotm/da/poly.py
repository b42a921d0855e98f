"""Truncated multivariate Taylor polynomials and polynomial maps."""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .. import _kernels
from ..errors import SingularityError
from .context import DaContext


def _same_ctx(a: "TruncatedPolynomial", b: "TruncatedPolynomial") -> None:
    if a.ctx is not b.ctx:
        raise ValueError(f"context mismatch: {a.ctx!r} vs {b.ctx!r}")


class TruncatedPolynomial:
    """Multivariate Taylor polynomial truncated at the context order.

    Coefficients are stored densely over the graded monomial basis of the
    context.  Instances are treated as immutable: every operation returns a
    new polynomial.

    Parameters
    ----------
    ctx : DaContext
    coeffs : array_like, optional
        Dense coefficient vector of length ``ctx.size``.  Zero if omitted.
    """

    __slots__ = ("ctx", "c")
    __array_priority__ = 100  # numpy scalars defer to our reflected operators

    def __init__(self, ctx: DaContext, coeffs=None):
        self.ctx = ctx
        if coeffs is None:
            c = np.zeros(ctx.size)
        else:
            c = np.array(coeffs, dtype=np.float64)
            if c.shape != (ctx.size,):
                raise ValueError(f"expected {ctx.size} coefficients, got shape {c.shape}")
        c.flags.writeable = False
        self.c = c

    @classmethod
    def _wrap(cls, ctx: DaContext, c: np.ndarray) -> "TruncatedPolynomial":
        # internal constructor; caller hands over ownership of c
        p = object.__new__(cls)
        p.ctx = ctx
        c.flags.writeable = False
        p.c = c
        return p

    @classmethod
    def constant(cls, ctx: DaContext, value: float) -> "TruncatedPolynomial":
        c = np.zeros(ctx.size)
        c[0] = value
        return cls._wrap(ctx, c)

    @classmethod
    def from_terms(cls, ctx: DaContext, terms: dict) -> "TruncatedPolynomial":
        """Build from ``{exponent tuple: coefficient}``."""
        c = np.zeros(ctx.size)
        for exps, val in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != ctx.nvars:
                raise ValueError(f"exponent {exps} has wrong length for nvars={ctx.nvars}")
            if sum(exps) > ctx.order:
                raise ValueError(f"exponent {exps} exceeds order {ctx.order}")
            c[ctx.index[exps]] += val
        return cls._wrap(ctx, c)

    # -- inspection -----------------------------------------------------

    @property
    def cons(self) -> float:
        """Constant part."""
        return float(self.c[0])

    def terms(self) -> dict:
        """Nonzero coefficients keyed by exponent tuple."""
        exps = self.ctx.exponents
        return {tuple(int(x) for x in exps[m]): float(self.c[m])
                for m in np.flatnonzero(self.c)}

    def coefficient(self, exps: Sequence[int]) -> float:
        return float(self.c[self.ctx.index[tuple(exps)]])

    def linear(self) -> np.ndarray:
        """Gradient at the expansion point (first-order coefficients)."""
        return self.c[1:1 + self.ctx.nvars].copy()

    def order_norms(self) -> np.ndarray:
        """1-norm of the coefficients of each total degree 0..k."""
        s = self.ctx.degree_start
        a = np.abs(self.c)
        return np.array([a[s[d]:s[d + 1]].sum() for d in range(self.ctx.order + 1)])

    def __repr__(self) -> str:
        t = self.terms()
        if not t:
            return "TruncatedPolynomial(0)"
        parts = []
        for e, v in t.items():
            mono = "*".join(f"x{i}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(e) if p)
            parts.append(f"{v:+.6g}" + (f"*{mono}" if mono else ""))
        return "TruncatedPolynomial(" + " ".join(parts) + ")"

    # -- arithmetic -----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, TruncatedPolynomial):
            _same_ctx(self, other)
            return other
        return None

    def __neg__(self):
        return TruncatedPolynomial._wrap(self.ctx, -self.c)

    def __pos__(self):
        return self

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return TruncatedPolynomial._wrap(self.ctx, self.c + o.c)
        c = self.c.copy()
        c[0] += other
        return TruncatedPolynomial._wrap(self.ctx, c)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is not None:
            return TruncatedPolynomial._wrap(self.ctx, self.c - o.c)
        c = self.c.copy()
        c[0] -= other
        return TruncatedPolynomial._wrap(self.ctx, c)

    def __rsub__(self, other):
        c = -self.c
        c[0] += other
        return TruncatedPolynomial._wrap(self.ctx, c)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is not None:
            ctx = self.ctx
            return TruncatedPolynomial._wrap(
                ctx, _kernels.mul(self.c, o.c, ctx.mul_i, ctx.mul_j, ctx.mul_t, ctx.size))
        return TruncatedPolynomial._wrap(self.ctx, self.c * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self * o.reciprocal()
        return TruncatedPolynomial._wrap(self.ctx, self.c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) and n >= 0:
            n = int(n)
            result = TruncatedPolynomial.constant(self.ctx, 1.0)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        return self.power(float(n))

    # -- calculus -------------------------------------------------------

    def derive(self, var: int) -> "TruncatedPolynomial":
        """Partial derivative with respect to variable ``var``."""
        src, dst, fac = self.ctx.derivative_table(self.ctx.check_var(var))
        c = np.zeros(self.ctx.size)
        c[dst] = self.c[src] * fac
        return TruncatedPolynomial._wrap(self.ctx, c)

    def antiderive(self, var: int) -> "TruncatedPolynomial":
        """Antiderivative in ``var`` with zero integration constant."""
        src, dst, fac = self.ctx.antiderivative_table(self.ctx.check_var(var))
        c = np.zeros(self.ctx.size)
        c[dst] = self.c[src] * fac
        return TruncatedPolynomial._wrap(self.ctx, c)

    # -- evaluation -----------------------------------------------------

    def evaluate(self, delta) -> float:
        """Value at displacement ``delta`` from the expansion point."""
        ctx = self.ctx
        x = np.asarray(delta, dtype=np.float64)
        if x.shape != (ctx.nvars,):
            raise ValueError(f"expected {ctx.nvars} displacement components")
        return float(self.c @ _kernels.monomials(x, ctx.parent, ctx.pvar, ctx.size))

    __call__ = evaluate

    # -- intrinsics -----------------------------------------------------

    def _series(self, coeffs: Sequence[float]) -> "TruncatedPolynomial":
        """Sum coeffs[j] * (self - a0)**j by Horner's rule."""
        ctx = self.ctx
        dx = self.c.copy()
        dx[0] = 0.0
        k = ctx.order
        res = np.zeros(ctx.size)
        res[0] = coeffs[k]
        for j in range(k - 1, -1, -1):
            res = _kernels.mul(res, dx, ctx.mul_i, ctx.mul_j, ctx.mul_t, ctx.size)
            res[0] += coeffs[j]
        return TruncatedPolynomial._wrap(ctx, res)

    def exp(self):
        e0 = math.exp(self.c[0])
        return self._series([e0 / math.factorial(j) for j in range(self.ctx.order + 1)])

    def log(self):
        a0 = float(self.c[0])
        if a0 <= 0.0:
            raise ValueError(f"log of non-positive constant part {a0}")
        co = [math.log(a0)]
        co += [(-1) ** (j + 1) / (j * a0 ** j) for j in range(1, self.ctx.order + 1)]
        return self._series(co)

    def power(self, alpha: float):
        """Real power ``self**alpha`` via the binomial series."""
        a0 = float(self.c[0])
        if a0 == 0.0 or (a0 < 0.0 and not float(alpha).is_integer()):
            raise ValueError(f"power {alpha} undefined at constant part {a0}")
        co = []
        binom = 1.0
        for j in range(self.ctx.order + 1):
            co.append(binom * a0 ** (alpha - j))
            binom *= (alpha - j) / (j + 1)
        return self._series(co)

    def sqrt(self):
        if self.c[0] <= 0.0:
            raise ValueError(f"sqrt of non-positive constant part {self.c[0]}")
        return self.power(0.5)

    def reciprocal(self):
        a0 = float(self.c[0])
        if a0 == 0.0:
            raise ZeroDivisionError("reciprocal of polynomial with zero constant part")
        inv = 1.0 / a0
        co = [inv * (-inv) ** j for j in range(self.ctx.order + 1)]
        return self._series(co)

    def sin(self):
        s, c = math.sin(self.c[0]), math.cos(self.c[0])
        cyc = (s, c, -s, -c)
        return self._series([cyc[j % 4] / math.factorial(j) for j in range(self.ctx.order + 1)])

    def cos(self):
        s, c = math.sin(self.c[0]), math.cos(self.c[0])
        cyc = (c, -s, -c, s)
        return self._series([cyc[j % 4] / math.factorial(j) for j in range(self.ctx.order + 1)])

    def _atan_nilpotent(self, w: "TruncatedPolynomial") -> "TruncatedPolynomial":
        # atan(w) for w with zero constant part
        co = [0.0] * (self.ctx.order + 1)
        for j in range(1, self.ctx.order + 1, 2):
            co[j] = (-1) ** (j // 2) / j
        return w._series(co)

    def atan(self):
        a0 = float(self.c[0])
        w = (self - a0) / (1.0 + a0 * self)
        return self._atan_nilpotent(w) + math.atan(a0)

    def atan2(self, x: "TruncatedPolynomial | float") -> "TruncatedPolynomial":
        """Two-argument arctangent ``atan2(self, x)``."""
        y = self
        if not isinstance(x, TruncatedPolynomial):
            x = TruncatedPolynomial.constant(self.ctx, x)
        _same_ctx(y, x)
        y0, x0 = float(y.c[0]), float(x.c[0])
        if x0 == 0.0 and y0 == 0.0:
            raise ValueError("atan2 undefined at (0, 0)")
        w = (x0 * y - y0 * x) / (x0 * x + y0 * y)
        return self._atan_nilpotent(w) + math.atan2(y0, x0)


def make_variable(ctx: DaContext, index: int, center: float = 0.0) -> TruncatedPolynomial:
    """Polynomial ``center + dx_index``."""
    ctx.check_var(index)
    c = np.zeros(ctx.size)
    c[0] = center
    c[1 + index] = 1.0
    return TruncatedPolynomial._wrap(ctx, c)


def multiply(a: TruncatedPolynomial, b: TruncatedPolynomial) -> TruncatedPolynomial:
    _same_ctx(a, b)
    return a * b


_INTRINSICS = {
    "sin": TruncatedPolynomial.sin,
    "cos": TruncatedPolynomial.cos,
    "sqrt": TruncatedPolynomial.sqrt,
    "exp": TruncatedPolynomial.exp,
    "log": TruncatedPolynomial.log,
    "reciprocal": TruncatedPolynomial.reciprocal,
    "atan": TruncatedPolynomial.atan,
}


def intrinsic(name: str, a: TruncatedPolynomial, *args) -> TruncatedPolynomial:
    """Apply an elementary function by tag.

    ``name`` is one of sin, cos, sqrt, exp, log, reciprocal, atan,
    ``power`` (extra argument: exponent) or ``atan2`` (extra argument: x).
    """
    if name == "power":
        return a.power(*args)
    if name == "atan2":
        return a.atan2(*args)
    try:
        return _INTRINSICS[name](a)
    except KeyError:
        raise ValueError(f"unknown intrinsic {name!r}") from None


def derive(a: TruncatedPolynomial, var: int) -> TruncatedPolynomial:
    return a.derive(var)


def antiderive(a: TruncatedPolynomial, var: int) -> TruncatedPolynomial:
    return a.antiderive(var)


class PolynomialMap:
    """Ordered vector of polynomials over one context.

    Stored as a dense ``(ncomp, ctx.size)`` coefficient array.
    """

    __slots__ = ("ctx", "coef")

    def __init__(self, ctx: DaContext, coef):
        coef = np.array(coef, dtype=np.float64, ndmin=2)
        if coef.ndim != 2 or coef.shape[1] != ctx.size:
            raise ValueError(f"coefficient array must have shape (n, {ctx.size})")
        coef.flags.writeable = False
        self.ctx = ctx
        self.coef = coef

    @classmethod
    def from_polys(cls, polys: Iterable[TruncatedPolynomial]) -> "PolynomialMap":
        polys = list(polys)
        if not polys:
            raise ValueError("empty map")
        ctx = polys[0].ctx
        for p in polys[1:]:
            _same_ctx(polys[0], p)
        return cls(ctx, np.stack([p.c for p in polys]))

    @classmethod
    def identity(cls, ctx: DaContext, centers=None) -> "PolynomialMap":
        coef = np.zeros((ctx.nvars, ctx.size))
        coef[np.arange(ctx.nvars), 1 + np.arange(ctx.nvars)] = 1.0
        if centers is not None:
            coef[:, 0] = centers
        return cls(ctx, coef)

    def __len__(self) -> int:
        return self.coef.shape[0]

    def __getitem__(self, i: int) -> TruncatedPolynomial:
        return TruncatedPolynomial._wrap(self.ctx, self.coef[i].copy())

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def components(self) -> list[TruncatedPolynomial]:
        return list(self)

    @property
    def cons(self) -> np.ndarray:
        return self.coef[:, 0].copy()

    def jacobian(self) -> np.ndarray:
        """First-order coefficient matrix, shape (ncomp, nvars)."""
        n = self.ctx.nvars
        return self.coef[:, 1:1 + n].copy()

    def evaluate(self, delta) -> np.ndarray:
        x = np.ascontiguousarray(delta, dtype=np.float64)
        if x.shape != (self.ctx.nvars,):
            raise ValueError(f"expected {self.ctx.nvars} displacement components")
        return _kernels.eval_map(self.coef, x, self.ctx.parent, self.ctx.pvar)

    __call__ = evaluate

    def __repr__(self) -> str:
        return f"PolynomialMap({len(self)} components, {self.ctx!r})"

    # -- composition and inversion ------------------------------------

    def compose(self, inner: "PolynomialMap", allow_offset: bool = False) -> "PolynomialMap":
        """Taylor expansion of ``self(inner)`` in the context of ``inner``.

        ``inner`` must have one component per variable of ``self``.  Its
        constant parts must vanish unless ``allow_offset`` is set, in which
        case ``self`` is evaluated as a polynomial at the shifted argument.
        """
        return compose(self, inner, allow_offset=allow_offset)

    def invert(self) -> "PolynomialMap":
        return invert(self)

    # -- text dump ------------------------------------------------------

    def dump(self) -> str:
        """Text form: one ``exponents | coefficient`` line per nonzero term."""
        lines = [f"# order {self.ctx.order} nvars {self.ctx.nvars} components {len(self)}"]
        exps = self.ctx.exponents
        for i in range(len(self)):
            lines.append(f"# component {i}")
            for m in np.flatnonzero(self.coef[i]):
                e = " ".join(str(int(x)) for x in exps[m])
                lines.append(f"{e} | {self.coef[i, m]:.16e}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "PolynomialMap":
        lines = iter(text.splitlines())
        head = next(lines).split()
        if head[:2] != ["#", "order"]:
            raise ValueError("not a polynomial map dump")
        order, nvars, ncomp = int(head[2]), int(head[4]), int(head[6])
        ctx = DaContext(order, nvars)
        coef = np.zeros((ncomp, ctx.size))
        comp = -1
        for line in lines:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# component"):
                comp = int(line.split()[2])
                continue
            if line.startswith("#"):
                continue
            left, right = line.split("|")
            e = tuple(int(x) for x in left.split())
            coef[comp, ctx.index[e]] = float(right)
        return cls(ctx, coef)


def _monomial_polys(outer_ctx: DaContext, inner: PolynomialMap) -> np.ndarray:
    """Coefficients of every outer monomial evaluated at ``inner``."""
    ictx = inner.ctx
    vals = np.empty((outer_ctx.size, ictx.size))
    vals[0] = 0.0
    vals[0, 0] = 1.0
    parent, pvar = outer_ctx.parent, outer_ctx.pvar
    mi, mj, mt = ictx.mul_i, ictx.mul_j, ictx.mul_t
    for m in range(1, outer_ctx.size):
        p = parent[m]
        if p == 0:
            vals[m] = inner.coef[pvar[m]]
        else:
            vals[m] = _kernels.mul(vals[p], inner.coef[pvar[m]], mi, mj, mt, ictx.size)
    return vals


def compose(outer: PolynomialMap, inner: PolynomialMap, allow_offset: bool = False) -> PolynomialMap:
    """Taylor expansion of ``outer(inner)``; see :meth:`PolynomialMap.compose`."""
    if len(inner) != outer.ctx.nvars:
        raise ValueError(f"inner map has {len(inner)} components, outer expects {outer.ctx.nvars}")
    if not allow_offset and np.any(inner.coef[:, 0] != 0.0):
        raise ValueError("inner map has nonzero constant parts")
    vals = _monomial_polys(outer.ctx, inner)
    return PolynomialMap(inner.ctx, outer.coef @ vals)


def invert(m: PolynomialMap) -> PolynomialMap:
    """Inverse of a square origin-preserving map, truncated at the order.

    Uses the fixed-point iteration ``I <- A^-1 (id - N o I)`` where ``A`` is
    the linear part and ``N`` the nonlinear part; each sweep fixes one more
    order.
    """
    ctx = m.ctx
    n = ctx.nvars
    if len(m) != n:
        raise ValueError(f"map with {len(m)} components in {n} variables is not square")
    if np.any(np.abs(m.coef[:, 0]) > 0.0):
        raise ValueError("map to invert must have zero constant part")
    a = m.jacobian()
    try:
        ainv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        raise SingularityError("linear part of map is singular") from None
    if not np.all(np.isfinite(ainv)) or np.linalg.cond(a) > 1e14:
        raise SingularityError("linear part of map is singular")
    nonlin = m.coef.copy()
    nonlin[:, 1:1 + n] = 0.0
    nonlin = PolynomialMap(ctx, nonlin)
    ident = PolynomialMap.identity(ctx).coef
    inv = PolynomialMap(ctx, ainv @ ident)
    for _ in range(ctx.order - 1):
        inv = PolynomialMap(ctx, ainv @ (ident - compose(nonlin, inv).coef))
    return inv


def partial_invert(c: PolynomialMap, x_vars: Sequence[int], tol: float = 1e-9) -> PolynomialMap:
    """Solve ``c(x, p) = 0`` for ``x(p)`` as a Taylor polynomial.

    Parameters
    ----------
    c : PolynomialMap
        One component per solved variable.
    x_vars : sequence of int
        Indices of the solved variables ``x``; every other variable is a
        parameter.
    tol : float
        Largest admissible ``|c(x0, p0)|`` at the expansion point.

    Returns
    -------
    PolynomialMap
        ``len(x_vars)`` components in the same context, giving the
        displacement of each ``x`` variable as a function of the parameters
        only.
    """
    ctx = c.ctx
    x_vars = [ctx.check_var(v) for v in x_vars]
    if len(set(x_vars)) != len(x_vars) or len(x_vars) != len(c):
        raise ValueError("need one equation per distinct solved variable")
    c0 = c.coef[:, 0].copy()
    if np.any(np.abs(c0) > tol):
        raise ValueError(f"residual at expansion point {np.max(np.abs(c0)):.3e} exceeds {tol:g}")
    p_vars = [v for v in range(ctx.nvars) if v not in x_vars]
    # full map F(x, p) = (c(x, p) - c0, p) in the native variable ordering:
    # slot x_vars[i] holds equation i, parameter slots stay identity
    full = np.zeros((ctx.nvars, ctx.size))
    cc = c.coef.copy()
    cc[:, 0] = 0.0
    full[x_vars] = cc
    for v in p_vars:
        full[v, 1 + v] = 1.0
    inv = invert(PolynomialMap(ctx, full))
    # x(p) = F^-1(w = -c0, p)
    sub = np.zeros((ctx.nvars, ctx.size))
    for i, v in enumerate(x_vars):
        sub[v, 0] = -c0[i]
    for v in p_vars:
        sub[v, 1 + v] = 1.0
    xs = compose(inv, PolynomialMap(ctx, sub), allow_offset=True).coef[x_vars]
    # The truncated inverse evaluated at the offset -c0 misses the omitted
    # orders times c0; chord iterations on c(x(p), p) = 0 remove that.
    ainv = np.linalg.inv(c.jacobian()[:, x_vars])
    inner = PolynomialMap.identity(ctx).coef.copy()
    scale = max(1.0, float(np.max(np.abs(c.coef))))
    for _ in range(ctx.order + 2):
        inner[x_vars] = xs
        r = compose(c, PolynomialMap(ctx, inner), allow_offset=True).coef
        if np.max(np.abs(r)) <= 1e-16 * scale:
            break
        xs = xs - ainv @ r
    return PolynomialMap(ctx, xs)
