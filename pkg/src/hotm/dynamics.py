"""Equations of motion for every element set.

Each ``rhs_*`` function maps a state sequence (floats or truncated
polynomials, model units) to the list of time derivatives.  The
:class:`OdeSystem` wrapper selects the formulation, optionally switches the
independent variable to the fast angle and appends time as an extra state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .da.dmath import cons, cos, sin, sqrt
from .elements import ElementSet
from .errors import SingularityError
from .forces import (
    ForceModel,
    drag_accel,
    drag_rtn,
    j2_mee_partials,
    orbital_forces,
    zonal_cartesian,
    zonal_cylindrical,
    zonal_rtn_z,
)

ECC_GUARD = 1e-14
RHO_GUARD = 1e-14


class Formulation(str, Enum):
    AUTO = "auto"
    GAUSS = "gauss"
    LAGRANGE = "lagrange"
    HAMILTONIAN = "hamiltonian"


def _j2_only(model: ForceModel) -> bool:
    j = model.zonal.j
    return not model.has_drag and len(j) >= 1 and all(x == 0.0 for x in j[1:])


def _check_positive(value, what: str, element: str) -> None:
    if not cons(value) > 0.0:
        raise SingularityError(f"{what} = {cons(value):.3e} is not positive", element=element)


# -- classical elements -------------------------------------------------------


def rhs_coe(x: Sequence, model: ForceModel) -> list:
    a, e, inc, raan, argp, nu = x
    if abs(cons(e)) < ECC_GUARD:
        raise SingularityError("eccentricity vanished in COE dynamics", element="argp")
    mu = model.mu
    p = a * (1.0 - e * e)
    _check_positive(p, "semi-latus rectum", "a")
    snu, cnu = sin(nu), cos(nu)
    r = p / (1.0 + e * cnu)
    u = argp + nu
    su, cu = sin(u), cos(u)
    si, ci = sin(inc), cos(inc)
    h = sqrt(mu * p)
    vr = sqrt(mu / p) * e * snu
    vt = h / r
    fr, ft, fn_s, _ = orbital_forces(model, r, su, cu, ci, si * si, si, vr, vt)
    inv_h = 1.0 / h
    fn = fn_s * si
    pr = p + r
    a_dot = 2.0 * a * a * inv_h * (e * snu * fr + p / r * ft)
    e_dot = inv_h * (p * snu * fr + (pr * cnu + e * r) * ft)
    i_dot = r * cu * inv_h * fn
    raan_dot = r * su * inv_h * fn_s
    common = inv_h / e * (p * cnu * fr - pr * snu * ft)
    argp_dot = -common - r * ci * su * inv_h * fn_s
    nu_dot = h / (r * r) + common
    return [a_dot, e_dot, i_dot, raan_dot, argp_dot, nu_dot]


# -- modified equinoctial elements ---------------------------------------------


def _mee_geometry(p, f, g, h, k, L):
    sL, cL = sin(L), cos(L)
    w = 1.0 + f * cL + g * sL
    s2 = 1.0 + h * h + k * k
    return sL, cL, w, s2


def rhs_mee_gauss(x: Sequence, model: ForceModel) -> list:
    p, f, g, h, k, L = x
    _check_positive(p, "semi-latus rectum", "p")
    mu = model.mu
    sL, cL, w, s2 = _mee_geometry(p, f, g, h, k, L)
    r = p / w
    inv_s2 = 1.0 / s2
    hk = h * sL - k * cL
    zr = 2.0 * hk * inv_s2
    zt = 2.0 * (h * cL + k * sL) * inv_s2
    zn = (1.0 - h * h - k * k) * inv_s2
    fr, ft, fn = zonal_rtn_z(model, r, zr, zt, zn)
    if model.has_drag:
        sq = sqrt(mu / p)
        d = drag_rtn(model, r, zt, zn, sq * (f * sL - g * cL), sq * w)
        fr, ft, fn = fr + d.f_r, ft + d.f_t, fn + d.f_n
    sqp = sqrt(p / mu)
    inv_w = 1.0 / w
    hkn = hk * fn * inv_w
    p_dot = 2.0 * p * inv_w * sqp * ft
    f_dot = sqp * (fr * sL + ((w + 1.0) * cL + f) * ft * inv_w - g * hkn)
    g_dot = sqp * (-fr * cL + ((w + 1.0) * sL + g) * ft * inv_w + f * hkn)
    c = 0.5 * sqp * s2 * fn * inv_w
    h_dot = c * cL
    k_dot = c * sL
    L_dot = sqrt(mu * p) * (w / p) ** 2 + sqp * hkn
    return [p_dot, f_dot, g_dot, h_dot, k_dot, L_dot]


def rhs_mee_lagrange(x: Sequence, model: ForceModel) -> list:
    """Lagrange form driven by the J2 disturbing-function partials."""
    if not _j2_only(model):
        raise ValueError("the Lagrange form of the MEE dynamics covers J2 only")
    p, f, g, h, k, L = x
    _check_positive(p, "semi-latus rectum", "p")
    mu = model.mu
    sL, cL, w, s2 = _mee_geometry(p, f, g, h, k, L)
    Rp, Rf, Rg, Rh, Rk, RL = j2_mee_partials(model, p, f, g, h, k, L)
    sqp = sqrt(p / mu)
    inv_h = 1.0 / sqrt(mu * p)
    ecc = 1.0 - f * f - g * g
    hk_sum = h * Rh + k * Rk
    bracket = g * Rf - f * Rg - RL
    half_s2 = 0.5 * s2
    p_dot = 2.0 * sqp * (-g * Rf + f * Rg + RL)
    f_dot = inv_h * (2.0 * p * g * Rp - ecc * Rg - g * half_s2 * hk_sum
                     + (f + (1.0 + w) * cL) * RL)
    g_dot = inv_h * (-2.0 * p * f * Rp + ecc * Rf + f * half_s2 * hk_sum
                     + (g + (1.0 + w) * sL) * RL)
    c = half_s2 * inv_h
    h_dot = c * (h * bracket - half_s2 * Rk)
    k_dot = c * (k * bracket + half_s2 * Rh)
    L_dot = sqrt(mu * p) * (w / p) ** 2 + c * hk_sum
    return [p_dot, f_dot, g_dot, h_dot, k_dot, L_dot]


# -- Hill and eccentricity-Hill variables -----------------------------------------


def rhs_hill_hamiltonian(x: Sequence, model: ForceModel) -> list:
    """Hamilton's equations for the J2 problem in polar-nodal variables."""
    if not _j2_only(model):
        raise ValueError("the Hamiltonian form of the Hill dynamics covers J2 only")
    r, u, raan, rdot, H, Hz = x
    _check_positive(r, "radius", "r")
    mu = model.mu
    c = mu * model.zonal.j[0] * model.re ** 2
    su, cu = sin(u), cos(u)
    su2 = su * su
    inv_r = 1.0 / r
    inv_r3 = inv_r * inv_r * inv_r
    ci = Hz / H
    si2 = 1.0 - ci * ci
    k3 = 3.0 * c * inv_r3
    u_dot = H * inv_r * inv_r + k3 * ci * ci * su2 / H
    raan_dot = -k3 * ci * su2 / H
    rdot_dot = (H * H * inv_r3 - mu * inv_r * inv_r
                + 1.5 * c * inv_r3 * inv_r * (3.0 * su2 * si2 - 1.0))
    H_dot = -k3 * cu * su * si2
    return [rdot, u_dot, raan_dot, rdot_dot, H_dot, 0.0 * r]


def rhs_hill_gauss(x: Sequence, model: ForceModel) -> list:
    r, u, raan, rdot, H, Hz = x
    _check_positive(r, "radius", "r")
    su, cu = sin(u), cos(u)
    ci = Hz / H
    si2 = 1.0 - ci * ci
    fr, ft, fn_s, _ = orbital_forces(model, r, su, cu, ci, si2, None, rdot, H / r)
    inv_h = 1.0 / H
    node = r * su * fn_s * inv_h
    return [
        rdot,
        H / (r * r) - ci * node,
        node,
        -model.mu / (r * r) + H * H / (r * r * r) + fr,
        r * ft,
        r * (ci * ft - si2 * cu * fn_s),
    ]


def rhs_ecchill(x: Sequence, model: ForceModel) -> list:
    H, Hz, fh, gh, raan, u = x
    _check_positive(H, "angular momentum", "H")
    mu = model.mu
    su, cu = sin(u), cos(u)
    w = 1.0 + fh * cu + gh * su
    _check_positive(w, "1 + e cos(nu)", "fhat")
    inv_h = 1.0 / H
    r = H * H / (mu * w)
    ci = Hz * inv_h
    si2 = 1.0 - ci * ci
    mh = mu * inv_h
    fr, ft, fn_s, _ = orbital_forces(model, r, su, cu, ci, si2, None,
                                     mh * (fh * su - gh * cu), mh * w)
    rh = r * inv_h
    node = rh * su * fn_s
    return [
        r * ft,
        r * (ci * ft - si2 * cu * fn_s),
        rh * (w * su * fr + ((w + 1.0) * cu + fh) * ft) + gh * ci * r * su * fn_s * inv_h,
        rh * (-w * cu * fr + ((w + 1.0) * su + gh) * ft) - fh * ci * r * su * fn_s * inv_h,
        node,
        H / (r * r) - ci * node,
    ]


# -- cylindrical coordinates ---------------------------------------------------


def _cyl_forces(model: ForceModel, rho, z, rhodot, phidot, zdot):
    f_rho, _, f_z = zonal_cylindrical(model, rho, z)
    f_phi = 0.0
    if model.has_drag:
        v_phi = rho * (phidot - model.omega)
        vmag = sqrt(rhodot * rhodot + v_phi * v_phi + zdot * zdot)
        kd = model.drag_k * model.air_density(sqrt(rho * rho + z * z)) * vmag
        f_rho = f_rho - kd * rhodot
        f_phi = -kd * v_phi
        f_z = f_z - kd * zdot
    return f_rho, f_phi, f_z


def rhs_cyl(x: Sequence, model: ForceModel) -> list:
    rho, phi, z, rhodot, phidot, zdot = x
    if cons(rho) < RHO_GUARD:
        raise SingularityError("rho vanished: cylindrical coordinates singular", element="rho")
    f_rho, f_phi, f_z = _cyl_forces(model, rho, z, rhodot, phidot, zdot)
    return [
        rhodot,
        phidot,
        zdot,
        rho * phidot * phidot + f_rho,
        (f_phi - 2.0 * rhodot * phidot) / rho,
        f_z,
    ]


def rhs_cylhz(x: Sequence, model: ForceModel) -> list:
    rho, phi, z, rhodot, hz, zdot = x
    if cons(rho) < RHO_GUARD:
        raise SingularityError("rho vanished: cylindrical coordinates singular", element="rho")
    inv_rho = 1.0 / rho
    phidot = hz * inv_rho * inv_rho
    f_rho, f_phi, f_z = _cyl_forces(model, rho, z, rhodot, phidot, zdot)
    return [rhodot, phidot, zdot, hz * phidot * inv_rho + f_rho, rho * f_phi, f_z]


# -- ideal elements --------------------------------------------------------------


def rhs_ideal(x: Sequence, model: ForceModel, zrow: Sequence[float]) -> list:
    """Ideal-element dynamics.

    ``zrow`` is the last row of the departure-frame rotation (inertial z axis
    expressed in departure axes).
    """
    l1, l2, l3, l4, H, C, S, th = x
    _check_positive(H, "angular momentum", "H")
    mu = model.mu
    st, ct = sin(th), cos(th)
    hp = mu / H
    den = hp + C * ct + S * st
    _check_positive(den, "H/r", "C")
    r = H / den
    m0, m1, m2 = (float(v) for v in zrow)
    # inertial z axis in ideal-frame axes: zrow @ Q(lambda)
    q0 = (m0 * (1.0 - 2.0 * (l2 * l2 + l3 * l3)) + m1 * 2.0 * (l1 * l2 + l3 * l4)
          + m2 * 2.0 * (l1 * l3 - l2 * l4))
    q1 = (m0 * 2.0 * (l1 * l2 - l3 * l4) + m1 * (1.0 - 2.0 * (l1 * l1 + l3 * l3))
          + m2 * 2.0 * (l2 * l3 + l1 * l4))
    q2 = (m0 * 2.0 * (l1 * l3 + l2 * l4) + m1 * 2.0 * (l2 * l3 - l1 * l4)
          + m2 * (1.0 - 2.0 * (l1 * l1 + l2 * l2)))
    zr = q0 * ct + q1 * st
    zt = q1 * ct - q0 * st
    fr, ft, fn = zonal_rtn_z(model, r, zr, zt, q2)
    if model.has_drag:
        d = drag_rtn(model, r, zt, q2, C * st - S * ct, H / r)
        fr, ft, fn = fr + d.f_r, ft + d.f_t, fn + d.f_n
    k = 0.5 * r * fn / H
    r_p = r * hp / H
    return [
        k * (l4 * ct - l3 * st),
        k * (l4 * st + l3 * ct),
        k * (l1 * st - l2 * ct),
        -k * (l1 * ct + l2 * st),
        r * ft,
        (1.0 + r_p) * ft * ct + fr * st,
        (1.0 + r_p) * ft * st - fr * ct,
        H / (r * r),
    ]


# -- Cartesian ---------------------------------------------------------------------


def rhs_cartesian(x: Sequence, model: ForceModel) -> list:
    px, py, pz, vx, vy, vz = x
    r2 = px * px + py * py + pz * pz
    r = sqrt(r2)
    k = -model.mu / (r2 * r)
    ax, ay, az = zonal_cartesian(model, px, py, pz)
    ax, ay, az = ax + k * px, ay + k * py, az + k * pz
    if model.has_drag:
        dx, dy, dz = drag_accel(model, (px, py, pz), (vx, vy, vz))
        ax, ay, az = ax + dx, ay + dy, az + dz
    return [vx, vy, vz, ax, ay, az]


# -- energy --------------------------------------------------------------------------


def hamiltonian(es: ElementSet, x: Sequence[float], model: ForceModel,
                frame: np.ndarray | None = None) -> float:
    """Total conservative energy (kinetic + Keplerian + zonal) in model units."""
    from .elements import ElementState, to_cartesian
    st = ElementState(es, [float(v) for v in x], 0.0, frame)
    rv, vv = to_cartesian(st, model.mu)
    r = float(np.linalg.norm(rv))
    return float(vv @ vv / 2.0 - model.mu / r + model.potential(r, rv[2] / r))


# -- system wrapper ----------------------------------------------------------------------


def resolve_formulation(es: ElementSet, model: ForceModel,
                        formulation: Formulation | str = Formulation.AUTO) -> Formulation:
    form = Formulation(formulation)
    if es is ElementSet.MEE:
        if form is Formulation.AUTO:
            return Formulation.LAGRANGE if _j2_only(model) else Formulation.GAUSS
        if form is Formulation.HAMILTONIAN:
            raise ValueError("MEE has no Hamiltonian form here")
        return form
    if es is ElementSet.HILL:
        if form is Formulation.AUTO:
            return Formulation.HAMILTONIAN if _j2_only(model) else Formulation.GAUSS
        if form is Formulation.LAGRANGE:
            raise ValueError("Hill dynamics come in Hamiltonian or Gauss form")
        return form
    if form not in (Formulation.AUTO, Formulation.GAUSS):
        raise ValueError(f"{es.value} supports only the Gauss form")
    return Formulation.GAUSS


def time_rhs(es: ElementSet, model: ForceModel, formulation: Formulation | str = "auto",
             frame: np.ndarray | None = None) -> Callable[[Sequence], list]:
    """Return ``f(x) -> dx/dt`` for the chosen set and formulation."""
    es = ElementSet.parse(es)
    form = resolve_formulation(es, model, formulation)
    if es is ElementSet.COE:
        return lambda x: rhs_coe(x, model)
    if es is ElementSet.MEE:
        fn = rhs_mee_lagrange if form is Formulation.LAGRANGE else rhs_mee_gauss
        return lambda x: fn(x, model)
    if es is ElementSet.HILL:
        fn = rhs_hill_hamiltonian if form is Formulation.HAMILTONIAN else rhs_hill_gauss
        return lambda x: fn(x, model)
    if es is ElementSet.ECCHILL:
        return lambda x: rhs_ecchill(x, model)
    if es is ElementSet.CYL:
        return lambda x: rhs_cyl(x, model)
    if es is ElementSet.CYLHZ:
        return lambda x: rhs_cylhz(x, model)
    if es is ElementSet.CARTESIAN:
        return lambda x: rhs_cartesian(x, model)
    if es is ElementSet.IDEAL:
        if frame is None:
            raise ValueError("ideal dynamics need the departure frame")
        zrow = tuple(float(v) for v in np.asarray(frame)[2])
        return lambda x: rhs_ideal(x, model, zrow)
    raise ValueError(f"unsupported set {es}")


@dataclass
class OdeSystem:
    """First-order system ``dy/ds = F(s, y)`` for one element set.

    With ``independent='time'`` the state is the element vector itself.
    With ``independent='fast'`` the fast angle is the independent variable,
    the state holds the remaining elements followed by time.
    """

    element_set: ElementSet
    model: ForceModel
    independent: str = "time"
    formulation: Formulation | str = Formulation.AUTO
    frame: np.ndarray | None = None

    def __post_init__(self):
        self.element_set = ElementSet.parse(self.element_set)
        if self.independent not in ("time", "fast"):
            raise ValueError("independent must be 'time' or 'fast'")
        if self.independent == "fast" and self.element_set.fast_index is None:
            raise ValueError(f"{self.element_set.value} has no fast angle")
        self.formulation = resolve_formulation(self.element_set, self.model, self.formulation)
        self._f = time_rhs(self.element_set, self.model, self.formulation, self.frame)
        self._fast = self.element_set.fast_index
        # compiled float paths for the propagations that dominate run time
        self._kernel = None
        if not self.model.has_drag:
            if self.independent == "fast" and self.element_set is ElementSet.ECCHILL:
                self._kernel = _kernels.ecchill_fast_rhs
            elif (self.independent == "time" and self.element_set is ElementSet.MEE
                  and self.formulation is Formulation.GAUSS):
                self._kernel = _kernels.mee_gauss_rhs
        j = tuple(self.model.zonal.j) + (0.0,) * (3 - len(self.model.zonal.j))
        self._kernel_args = (self.model.mu, self.model.re) + j

    @property
    def dim(self) -> int:
        # fast mode drops the fast angle and appends time
        return self.element_set.dim

    def pack(self, x: Sequence, t) -> list:
        """State vector for this system from full elements and time."""
        if self.independent == "time":
            return list(x)
        k = self._fast
        return list(x[:k]) + list(x[k + 1:]) + [t]

    def unpack(self, s, y: Sequence):
        """(full elements, time) from independent variable and state."""
        if self.independent == "time":
            return list(y), s
        k = self._fast
        return list(y[:k]) + [s] + list(y[k:-1]), y[-1]

    def time_derivative(self, x: Sequence) -> list:
        return self._f(x)

    def __call__(self, s, y: Sequence) -> list:
        if self._kernel is not None and isinstance(y[0], float):
            out = self._kernel(s, y, *self._kernel_args)
            if out is not None:
                return out
        if self.independent == "time":
            return self._f(y)
        k = self._fast
        x = list(y[:k])
        x.append(s)
        x.extend(y[k:-1])
        d = self._f(x)
        sdot = d[k]
        if not cons(sdot) > 0.0:
            raise SingularityError(
                f"fast angle rate {cons(sdot):.3e} is not positive", element=self.element_set.fields[k])
        dt = 1.0 / sdot
        out = [v * dt for v in d[:k]]
        out.extend(v * dt for v in d[k + 1:])
        out.append(dt)
        return out
