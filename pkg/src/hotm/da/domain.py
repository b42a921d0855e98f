"""Truncation-error based estimate of the region where a map is accurate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .poly import PolynomialMap, TruncatedPolynomial

UNBOUNDED = math.inf


@dataclass(frozen=True)
class DomainEstimate:
    """Per-variable radii (scaled units) for a truncation error target.

    ``math.inf`` marks a variable along which the estimated truncation
    error is zero (polynomial at most linear in it).
    """

    radii: np.ndarray
    eps: float

    def contains(self, delta, scale: float = 1.0) -> bool:
        return bool(np.all(np.abs(delta) <= scale * self.radii))

    def first_exit(self, delta, scale: float = 1.0) -> int | None:
        """Index of the variable with the largest |delta| / radius ratio above 1."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(np.asarray(delta)) / (scale * self.radii)
        ratio = np.nan_to_num(ratio, nan=0.0)
        j = int(np.argmax(ratio))
        return j if ratio[j] > 1.0 else None


def variable_norms(p: TruncatedPolynomial, var: int) -> np.ndarray:
    """Order-wise 1-norms of the terms that contain ``x_var``.

    Entry ``j`` is the sum of |coefficient| over the monomials of total
    degree ``j`` in which ``var`` appears, i.e. the terms that move when
    ``x_var`` is displaced.
    """
    ctx = p.ctx
    mask = ctx.exponents[:, var] > 0
    return np.bincount(ctx.degree[mask], weights=np.abs(p.c[mask]), minlength=ctx.order + 1)


def tail_radius(norms: np.ndarray, eps: float, min_order: int = 2) -> float:
    """Radius at which the extrapolated omitted-order tail equals ``eps``.

    ``norms[j]`` is the coefficient magnitude attached to order ``j``.  A
    least-squares line ``log S_j = alpha + beta j`` over the nonzero orders
    ``j >= min_order`` is extrapolated to orders above ``k`` and the
    geometric tail ``sum_{j>k} exp(alpha + beta j) r**j`` is set equal to
    ``eps``.  The default skips the linear order, which carries the
    near-identity part of a transfer map rather than its nonlinearity.
    """
    k = len(norms) - 1
    js = np.arange(min_order, k + 1)
    s = np.asarray(norms[min_order:], dtype=float)
    nz = s > 0.0
    if not np.any(nz[max(0, 2 - min_order):]):
        return UNBOUNDED
    if nz.sum() == 1:
        # one nonlinear order: bound it directly
        j = int(js[nz][0])
        return float((eps / s[nz][0]) ** (1.0 / j))
    alpha, beta = _fit(js[nz], np.log(s[nz]))
    q = math.exp(beta)
    r_max = 1.0 / q

    def log_excess(r):
        x = q * r
        return alpha + (k + 1) * math.log(x) - math.log1p(-x) - math.log(eps)

    hi = r_max * (1.0 - 1e-15)
    if log_excess(hi) <= 0.0:
        return hi
    return float(brentq(log_excess, r_max * 1e-300 if r_max > 0 else 1e-300, hi,
                        xtol=1e-300, rtol=1e-14, maxiter=500))


def _fit(j: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    beta, alpha = np.polyfit(j.astype(float), y, 1)
    return float(alpha), float(beta)


def estimate_domain(m: PolynomialMap | TruncatedPolynomial, eps: float,
                    components=None, min_order: int = 2) -> DomainEstimate:
    """Per-variable accuracy radii of a polynomial map.

    For each variable and each selected component, the order-wise norms of
    the terms containing that variable (:func:`variable_norms`) feed
    :func:`tail_radius`; the variable's radius is the minimum over
    components.

    Parameters
    ----------
    m : PolynomialMap or TruncatedPolynomial
    eps : float
        Target truncation error.
    components : sequence of int, optional
        Components to include (default: all).
    min_order : int
        Lowest order used in the exponential fit.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if isinstance(m, TruncatedPolynomial):
        m = PolynomialMap.from_polys([m])
    if m.ctx.order < 3:
        raise ValueError("domain estimation needs order >= 3")
    comps = range(len(m)) if components is None else components
    radii = np.full(m.ctx.nvars, UNBOUNDED)
    for i in comps:
        p = m[i]
        for v in range(m.ctx.nvars):
            radii[v] = min(radii[v], tail_radius(variable_norms(p, v), eps, min_order))
    return DomainEstimate(radii=radii, eps=float(eps))
