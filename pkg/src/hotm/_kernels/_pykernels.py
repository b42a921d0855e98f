"""Pure numpy/Python implementations of the hot kernels.

Same signatures as the compiled ``_ckernels`` module; used when the
extension is not built or when ``HOTM_PURE_PYTHON=1``.
"""
import math

import numpy as np

CUTOFF = 1e-16


def mul(a, b, mi, mj, mt, size):
    out = np.bincount(mt, weights=a[mi] * b[mj], minlength=size)
    out[np.abs(out) < CUTOFF] = 0.0
    return out


def monomials(x, parent, pvar, size):
    """Values of every monomial at the point ``x``."""
    vals = np.empty(size)
    vals[0] = 1.0
    for m in range(1, size):
        vals[m] = vals[parent[m]] * x[pvar[m]]
    return vals


def eval_map(coef, x, parent, pvar):
    return coef @ monomials(x, parent, pvar, coef.shape[1])


def rk87_step(rhs, s, y, h, c, a_rows, b8, db):
    """One explicit RK8(7) step on a list of floats.

    ``a_rows[i]`` holds the (stage, coefficient) pairs of the nonzero
    entries of row ``i`` of the Butcher matrix; ``db = b8 - b7``.
    Returns ``(y_new, err)`` with ``err`` the max-norm of the embedded
    difference.
    """
    n = len(y)
    k = [rhs(s, y)]
    for i in range(1, 13):
        row = a_rows[i]
        yi = list(y)
        for j, aij in row:
            kj = k[j]
            f = h * aij
            for q in range(n):
                yi[q] += f * kj[q]
        k.append(rhs(s + c[i] * h, yi))
    y_new = list(y)
    err = 0.0
    for q in range(n):
        acc = 0.0
        e = 0.0
        for j in range(13):
            acc += b8[j] * k[j][q]
            e += db[j] * k[j][q]
        y_new[q] += h * acc
        e = abs(h * e)
        if e > err:
            err = e
    return y_new, err


def ecchill_fast_rhs(u, y, mu, re, j2, j3, j4):
    """Eccentric-Hill derivatives with respect to u for a zonal field.

    ``y = (H, Hz, fhat, ghat, raan, t)``.  Returns None at a singular
    state so the caller can fall back to the checked path.
    """
    H, Hz, fh, gh = y[0], y[1], y[2], y[3]
    su, cu = math.sin(u), math.cos(u)
    w = 1.0 + fh * cu + gh * su
    if not (H > 0.0 and w > 0.0):
        return None
    inv_h = 1.0 / H
    r = H * H / (mu * w)
    ci = Hz * inv_h
    si2 = 1.0 - ci * ci
    inv_r = 1.0 / r
    rr = re * inv_r
    mu_r2 = mu * inv_r * inv_r
    s2 = si2 * su * su
    q2 = rr * rr
    c2 = mu_r2 * j2 * q2
    c4 = mu_r2 * j4 * q2 * q2
    fr = 1.5 * c2 * (3.0 * s2 - 1.0) + 0.625 * c4 * (s2 * (35.0 * s2 - 30.0) + 3.0)
    b_even = 3.0 * c2 + 2.5 * c4 * (7.0 * s2 - 3.0)
    ft = -(b_even * si2 * su) * cu
    fn_s = -b_even * su * ci
    if j3 != 0.0:
        if si2 < 1e-28:
            return None
        si = math.sqrt(si2)
        c3 = mu_r2 * j3 * q2 * rr
        s = si * su
        fr += 2.0 * c3 * s * (5.0 * s2 - 3.0)
        q_odd = 1.5 * c3 * (5.0 * s2 - 1.0)
        ft -= q_odd * si * cu
        fn_s -= q_odd * ci / si
    rh = r * inv_h
    node = rh * su * fn_s
    udot = H * inv_r * inv_r - ci * node
    if not udot > 0.0:
        return None
    dt = 1.0 / udot
    return [
        r * ft * dt,
        r * (ci * ft - si2 * cu * fn_s) * dt,
        (rh * (w * su * fr + ((w + 1.0) * cu + fh) * ft) + gh * ci * node) * dt,
        (rh * (-w * cu * fr + ((w + 1.0) * su + gh) * ft) - fh * ci * node) * dt,
        node * dt,
        dt,
    ]


def mee_gauss_rhs(t, y, mu, re, j2, j3, j4):
    """Equinoctial-element time derivatives (Gauss form) for a zonal field.

    Returns None at a singular state.
    """
    p, f, g, h, k, L = y[0], y[1], y[2], y[3], y[4], y[5]
    if not p > 0.0:
        return None
    sL, cL = math.sin(L), math.cos(L)
    w = 1.0 + f * cL + g * sL
    if not w > 0.0:
        return None
    s2 = 1.0 + h * h + k * k
    r = p / w
    inv_s2 = 1.0 / s2
    hk = h * sL - k * cL
    zr = 2.0 * hk * inv_s2
    zt = 2.0 * (h * cL + k * sL) * inv_s2
    zn = (1.0 - h * h - k * k) * inv_s2
    inv_r = 1.0 / r
    rr = re * inv_r
    mu_r2 = mu * inv_r * inv_r
    q2 = rr * rr
    c2 = mu_r2 * j2 * q2
    c3 = mu_r2 * j3 * q2 * rr
    c4 = mu_r2 * j4 * q2 * q2
    zz = zr * zr
    fr = (1.5 * c2 * (3.0 * zz - 1.0) + 2.0 * c3 * zr * (5.0 * zz - 3.0)
          + 0.625 * c4 * (zz * (35.0 * zz - 30.0) + 3.0))
    q = 3.0 * c2 * zr + 1.5 * c3 * (5.0 * zz - 1.0) + 2.5 * c4 * zr * (7.0 * zz - 3.0)
    ft = -q * zt
    fn = -q * zn
    sqp = math.sqrt(p / mu)
    inv_w = 1.0 / w
    hkn = hk * fn * inv_w
    c = 0.5 * sqp * s2 * fn * inv_w
    return [
        2.0 * p * inv_w * sqp * ft,
        sqp * (fr * sL + ((w + 1.0) * cL + f) * ft * inv_w - g * hkn),
        sqp * (-fr * cL + ((w + 1.0) * sL + g) * ft * inv_w + f * hkn),
        c * cL,
        c * sL,
        math.sqrt(mu * p) * (w / p) ** 2 + sqp * hkn,
    ]
