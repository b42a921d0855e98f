# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same interface as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, fabs, sin, sqrt

cnp.import_array()

cdef double CUTOFF = 1e-16


def mul(const double[::1] a, const double[::1] b, const cnp.intp_t[::1] mi,
        const cnp.intp_t[::1] mj, const cnp.intp_t[::1] mt, Py_ssize_t size):
    out = np.zeros(size)
    cdef double[::1] o = out
    cdef Py_ssize_t p, n = mt.shape[0], m
    for p in range(n):
        o[mt[p]] += a[mi[p]] * b[mj[p]]
    for m in range(size):
        if fabs(o[m]) < CUTOFF:
            o[m] = 0.0
    return out


cdef void _monomials(const double[::1] x, const cnp.intp_t[::1] parent,
                     const cnp.intp_t[::1] pvar, double[::1] vals) noexcept nogil:
    cdef Py_ssize_t m, size = vals.shape[0]
    vals[0] = 1.0
    for m in range(1, size):
        vals[m] = vals[parent[m]] * x[pvar[m]]


def monomials(x, const cnp.intp_t[::1] parent, const cnp.intp_t[::1] pvar, Py_ssize_t size):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(size)
    _monomials(xv, parent, pvar, out)
    return out


def eval_map(const double[:, ::1] coef, x, const cnp.intp_t[::1] parent,
             const cnp.intp_t[::1] pvar):
    cdef Py_ssize_t n = coef.shape[0], size = coef.shape[1], i, m
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    vals_arr = np.empty(size)
    cdef double[::1] vals = vals_arr
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double acc
    _monomials(xv, parent, pvar, vals)
    for i in range(n):
        acc = 0.0
        for m in range(size):
            acc += coef[i, m] * vals[m]
        o[i] = acc
    return out


def rk87_step(rhs, double s, y, double h, c, a_rows, b8, db):
    cdef Py_ssize_t n = len(y), i, j, q, nz
    cdef double[13] cc, bb, ee
    cdef double[13][13] aa
    cdef double[13][64] kk
    cdef double[64] y0
    cdef double[64] yi
    cdef double acc, e, err = 0.0
    if n > 64:
        raise ValueError("rk87_step supports at most 64 state components")
    for i in range(13):
        cc[i] = c[i]
        bb[i] = b8[i]
        ee[i] = db[i]
        for j in range(13):
            aa[i][j] = 0.0
        for j, acc in a_rows[i]:
            aa[i][j] = acc
    for q in range(n):
        y0[q] = y[q]
    ki = rhs(s, y)
    for q in range(n):
        kk[0][q] = ki[q]
    for i in range(1, 13):
        for q in range(n):
            acc = 0.0
            for j in range(i):
                acc += aa[i][j] * kk[j][q]
            yi[q] = y0[q] + h * acc
        ki = rhs(s + cc[i] * h, [yi[q] for q in range(n)])
        for q in range(n):
            kk[i][q] = ki[q]
    out = [0.0] * n
    for q in range(n):
        acc = 0.0
        e = 0.0
        for j in range(13):
            acc += bb[j] * kk[j][q]
            e += ee[j] * kk[j][q]
        out[q] = y0[q] + h * acc
        e = fabs(h * e)
        if e > err:
            err = e
    return out, err


def ecchill_fast_rhs(double u, y, double mu, double re, double j2, double j3, double j4):
    cdef double H = y[0], Hz = y[1], fh = y[2], gh = y[3]
    cdef double su = sin(u), cu = cos(u)
    cdef double w = 1.0 + fh * cu + gh * su
    cdef double inv_h, r, ci, si2, inv_r, rr, mu_r2, s2, q2, c2, c3, c4, fr, b_even
    cdef double ft, fn_s, si, s, q_odd, rh, node, udot, dt
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
        si = sqrt(si2)
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


def mee_gauss_rhs(double t, y, double mu, double re, double j2, double j3, double j4):
    cdef double p = y[0], f = y[1], g = y[2], h = y[3], k = y[4], L = y[5]
    cdef double sL, cL, w, s2, r, inv_s2, hk, zr, zt, zn, inv_r, rr, mu_r2, q2
    cdef double c2, c3, c4, zz, fr, q, ft, fn, sqp, inv_w, hkn, c, wp
    if not p > 0.0:
        return None
    sL = sin(L)
    cL = cos(L)
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
    sqp = sqrt(p / mu)
    inv_w = 1.0 / w
    hkn = hk * fn * inv_w
    c = 0.5 * sqp * s2 * fn * inv_w
    wp = w / p
    return [
        2.0 * p * inv_w * sqp * ft,
        sqp * (fr * sL + ((w + 1.0) * cL + f) * ft * inv_w - g * hkn),
        sqp * (-fr * cL + ((w + 1.0) * sL + g) * ft * inv_w + f * hkn),
        c * cL,
        c * sL,
        sqrt(mu * p) * wp * wp + sqp * hkn,
    ]
