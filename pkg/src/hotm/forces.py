"""Zonal-harmonic and atmospheric-drag perturbations.

Every function is written against the generic math helpers so that it
accepts floats and truncated polynomials alike.  A :class:`ForceModel`
carries its own unit system: build it in km/s and call
:meth:`ForceModel.scaled` to obtain the equivalent model in integration
units (``mu = Re = 1``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import constants as C
from .constants import IDENTITY_SCALING, Scaling
from .da.dmath import cons, exp, sqrt
from .errors import SingularityError

# -- Legendre polynomials ---------------------------------------------------


def legendre(n: int, s):
    """Legendre polynomial P_n(s) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n > 4:
        raise ValueError(f"zonal degree {n} not supported (max 4)")
    p_prev, p = 1.0, s
    if n == 0:
        return p_prev
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * s * p - m * p_prev) / (m + 1)
    return p


def legendre_prime(n: int, s):
    """dP_n/ds using P'_{m+1} = P'_{m-1} + (2m + 1) P_m."""
    if n > 4:
        raise ValueError(f"zonal degree {n} not supported (max 4)")
    if n <= 0:
        return 0.0
    d_prev, d = 0.0, 1.0  # P'_0, P'_1
    for m in range(1, n):
        d_prev, d = d, d_prev + (2 * m + 1) * legendre(m, s)
    return d


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ZonalField:
    """Axially symmetric field: ``mu``, ``re`` and ``j = (J2, J3, J4)`` (prefix)."""

    mu: float = C.MU_EARTH
    re: float = C.RE_EARTH
    j: tuple[float, ...] = (C.J2,)

    def __post_init__(self):
        if self.mu <= 0 or self.re <= 0:
            raise ValueError("mu and re must be positive")
        if len(self.j) > 3:
            raise ValueError("at most J2..J4 supported")
        object.__setattr__(self, "j", tuple(float(x) for x in self.j))

    @property
    def even_only(self) -> bool:
        return all(jn == 0.0 for n, jn in enumerate(self.j, start=2) if n % 2)

    def potential(self, r, s):
        """Perturbing potential R(r, sin(declination))."""
        rr = self.re / r
        q = rr
        out = 0.0
        for n, jn in enumerate(self.j, start=2):
            q = q * rr
            if jn:
                out = out + jn * q * legendre(n, s)
        return self.mu / r * out


@dataclass(frozen=True)
class DensityTable:
    """Harris-Priester rows; densities stored in kg/km^3."""

    h_km: np.ndarray
    rho_min: np.ndarray
    rho_max: np.ndarray
    _rho: np.ndarray = field(init=False, repr=False)
    _scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h_km, dtype=float)
        if np.any(np.diff(h) <= 0):
            raise ValueError("table altitudes must be strictly increasing")
        rho = 0.5 * (np.asarray(self.rho_min, float) + np.asarray(self.rho_max, float))
        object.__setattr__(self, "_rho", rho)
        # scale height of each bracket for exponential interpolation
        object.__setattr__(self, "_scale", np.diff(h) / np.log(rho[:-1] / rho[1:]))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "DensityTable":
        """Read a ``h_km,rho_min,rho_max`` CSV with densities in g/km^3."""
        if path is None:
            text = resources.files("hotm.data").joinpath("harris_priester.csv").read_text()
        else:
            text = Path(path).read_text()
        rows = list(csv.DictReader(text.splitlines()))
        h = np.array([float(r["h_km"]) for r in rows])
        lo = np.array([float(r["rho_min"]) for r in rows]) * 1e-3
        hi = np.array([float(r["rho_max"]) for r in rows]) * 1e-3
        return cls(h, lo, hi)

    @property
    def mean_density(self) -> np.ndarray:
        return self._rho.copy()

    def density(self, altitude):
        """Mean density (kg/km^3) at ``altitude`` km, exponential in altitude."""
        h0 = cons(altitude)
        h = self.h_km
        if not (h[0] <= h0 <= h[-1]):
            raise SingularityError(
                f"altitude {h0:.3f} km outside density table [{h[0]:g}, {h[-1]:g}] km",
                element="altitude")
        k = min(int(np.searchsorted(h, h0, side="right")) - 1, len(h) - 2)
        return float(self._rho[k]) * exp(-(altitude - float(h[k])) / float(self._scale[k]))


_DEFAULT_TABLE: DensityTable | None = None


def default_density_table() -> DensityTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = DensityTable.load()
    return _DEFAULT_TABLE


def density(table: DensityTable, altitude):
    return table.density(altitude)


@dataclass(frozen=True)
class DragConfig:
    cd: float = C.CD
    area_to_mass: float = C.AREA_TO_MASS   # m^2/kg
    omega_e: float = C.OMEGA_EARTH         # rad/s
    table: DensityTable = field(default_factory=default_density_table, repr=False)

    def __post_init__(self):
        if self.cd < 0 or self.area_to_mass <= 0:
            raise ValueError("cd must be >= 0 and area_to_mass > 0")


class RtnAcceleration(NamedTuple):
    f_r: object
    f_t: object
    f_n: object


@dataclass(frozen=True)
class ForceModel:
    """Zonal field plus optional drag, expressed in the units of ``scaling``.

    ``zonal.mu`` and ``zonal.re`` are always stored in km units; the
    scaled values used by the equations of motion are ``self.mu`` and
    ``self.re``.
    """

    zonal: ZonalField = field(default_factory=ZonalField)
    drag: DragConfig | None = None
    scaling: Scaling = IDENTITY_SCALING
    mu: float = field(init=False)
    re: float = field(init=False)
    omega: float = field(init=False)
    drag_k: float = field(init=False)

    def __post_init__(self):
        sc = self.scaling
        object.__setattr__(self, "mu", self.zonal.mu / sc.mu)
        object.__setattr__(self, "re", self.zonal.re / sc.length)
        if self.drag is not None:
            object.__setattr__(self, "omega", self.drag.omega_e * sc.time)
            # 0.5 Cd A/m with A/m in km^2/kg; the length unit absorbs V * T
            object.__setattr__(self, "drag_k",
                               0.5 * self.drag.cd * self.drag.area_to_mass * 1e-6 * sc.length)
        else:
            object.__setattr__(self, "omega", 0.0)
            object.__setattr__(self, "drag_k", 0.0)

    @classmethod
    def from_case(cls, case, scaling: Scaling = IDENTITY_SCALING) -> "ForceModel":
        return cls(ZonalField(j=tuple(case.zonals)), DragConfig() if case.drag else None,
                   scaling)

    def scaled(self, scaling: Scaling | None = None) -> "ForceModel":
        sc = scaling or Scaling.from_mu_re(self.zonal.mu, self.zonal.re)
        return ForceModel(self.zonal, self.drag, sc)

    def with_drag(self, drag: DragConfig | None) -> "ForceModel":
        return ForceModel(self.zonal, drag, self.scaling)

    @property
    def has_drag(self) -> bool:
        return self.drag is not None and self.drag.cd > 0.0

    @property
    def conservative(self) -> bool:
        return not self.has_drag

    @property
    def j(self) -> tuple[float, ...]:
        return self.zonal.j

    def air_density(self, r):
        """Density in the model's drag units at radius ``r`` (model units)."""
        h_km = (r - self.re) * self.scaling.length
        return self.drag.table.density(h_km)

    def potential(self, r, s):
        """Perturbing potential R in model units."""
        rr = self.re / r
        q = rr
        out = 0.0
        for n, jn in enumerate(self.zonal.j, start=2):
            q = q * rr
            if jn:
                out = out + jn * q * legendre(n, s)
        return self.mu / r * out


# -- zonal accelerations -----------------------------------------------------


def _zonal_fr_q(model: ForceModel, r, s, s2=None):
    """Radial acceleration and the angular factor Q with f = f_r e_r - Q (z - s e_r)."""
    if s2 is None:
        s2 = s * s
    inv_r = 1.0 / r
    rr = model.re * inv_r
    mu_r2 = model.mu * inv_r * inv_r
    fr = 0.0
    q_ang = 0.0
    q = rr
    for n, jn in enumerate(model.zonal.j, start=2):
        q = q * rr
        if not jn:
            continue
        c = mu_r2 * (jn * q)
        if n == 2:
            fr = fr + 1.5 * c * (3.0 * s2 - 1.0)
            q_ang = q_ang + 3.0 * c * s
        elif n == 3:
            fr = fr + 2.0 * c * s * (5.0 * s2 - 3.0)
            q_ang = q_ang + 1.5 * c * (5.0 * s2 - 1.0)
        else:
            fr = fr + 0.625 * c * (s2 * (35.0 * s2 - 30.0) + 3.0)
            q_ang = q_ang + 2.5 * c * s * (7.0 * s2 - 3.0)
    return fr, q_ang


def zonal_rtn_z(model: ForceModel, r, zr, zt, zn) -> RtnAcceleration:
    """Zonal acceleration in the orbital frame.

    ``zr, zt, zn`` are the components of the inertial z axis along the
    radial, transverse and normal unit vectors.
    """
    fr, q = _zonal_fr_q(model, r, zr)
    return RtnAcceleration(fr, -q * zt, -q * zn)


def zonal_rtn(model: ForceModel | ZonalField, r, u, i) -> RtnAcceleration:
    """Zonal acceleration from radius, argument of latitude and inclination."""
    model = _as_model(model)
    if cons(r) <= 0.0:
        raise SingularityError("radius must be positive", element="r")
    from .da.dmath import cos, sin
    si, ci, su, cu = sin(i), cos(i), sin(u), cos(u)
    return zonal_rtn_z(model, r, si * su, si * cu, ci)


def zonal_cartesian(model: ForceModel | ZonalField, x, y, z):
    """Zonal perturbing acceleration (no Keplerian term) in inertial axes."""
    model = _as_model(model)
    r = sqrt(x * x + y * y + z * z)
    if cons(r) == 0.0:
        raise SingularityError("zero radius", element="r")
    s = z / r
    fr, q = _zonal_fr_q(model, r, s)
    a = (fr + q * s) / r
    return a * x, a * y, a * z - q


def zonal_cylindrical(model: ForceModel | ZonalField, rho, z):
    """Total gravity (Keplerian plus zonal) in cylindrical components (f_rho, f_phi, f_z)."""
    model = _as_model(model)
    r2 = rho * rho + z * z
    r = sqrt(r2)
    if cons(r) == 0.0:
        raise SingularityError("zero radius", element="r")
    s = z / r
    fr, q = _zonal_fr_q(model, r, s)
    kep = model.mu / (r2 * r)
    a = (fr + q * s) / r
    return a * rho - kep * rho, 0.0, a * z - q - kep * z


def j2_mee_partials(model: ForceModel | ZonalField, p, f, g, h, k, L):
    """Partial derivatives of the J2 disturbing function in equinoctial elements.

    Returns ``(dR/dp, dR/df, dR/dg, dR/dh, dR/dk, dR/dL)`` for use in the
    Lagrange-form equations of motion (acceleration = +gradient).
    """
    from .da.dmath import cos, sin
    model = _as_model(model)
    j2 = model.zonal.j[0] if model.zonal.j else 0.0
    sL, cL = sin(L), cos(L)
    w = 1.0 + f * cL + g * sL
    s2 = 1.0 + h * h + k * k
    r = p / w
    sphi = 2.0 * (h * sL - k * cL) / s2
    rr = model.re / r
    c = j2 * rr * rr
    p2 = 1.5 * sphi * sphi - 0.5
    dp2 = 3.0 * sphi
    mu = model.mu
    inv_wr = 1.0 / (w * r)
    r_s4 = r * s2 * s2
    dp = 3.0 * mu * inv_wr / r * c * p2
    df = -3.0 * mu * cL * inv_wr * c * p2
    dg = -3.0 * mu * sL * inv_wr * c * p2
    dh = -2.0 * mu / r_s4 * ((1.0 - h * h + k * k) * sL + 2.0 * h * k * cL) * c * dp2
    dk = 2.0 * mu / r_s4 * ((1.0 + h * h - k * k) * cL + 2.0 * h * k * sL) * c * dp2
    dL = (-2.0 * mu / (r * s2) * (h * cL + k * sL) * c * dp2
          - 3.0 * mu * inv_wr * (g * cL - f * sL) * c * p2)
    return dp, df, dg, dh, dk, dL


def orbital_forces(model: ForceModel, r, su, cu, ci, si2, si=None, vr=None, vt=None):
    """Orbital-frame perturbation for element sets that divide by sin(i).

    Parameters
    ----------
    r : radius
    su, cu : sin and cos of the argument of latitude
    ci, si2 : cos(i) and sin(i)**2
    si : sin(i), optional.  Only needed for odd zonal terms; without it
        ``f_n`` itself is not returned.
    vr, vt : radial and transverse inertial velocity (needed for drag).

    Returns
    -------
    (f_r, f_t, f_n / sin(i), f_n or None)
        The ratio ``f_n / sin(i)`` is formed analytically for the even
        zonal terms and for drag, so it stays finite at i = 0.
    """
    inv_r = 1.0 / r
    rr = model.re * inv_r
    mu_r2 = model.mu * inv_r * inv_r
    s2 = si2 * su * su
    fr = 0.0
    b_even = 0.0   # Q_even / s
    q_odd = 0.0
    has_odd = False
    q = rr
    for n, jn in enumerate(model.zonal.j, start=2):
        q = q * rr
        if not jn:
            continue
        c = mu_r2 * (jn * q)
        if n == 2:
            fr = fr + 1.5 * c * (3.0 * s2 - 1.0)
            b_even = b_even + 3.0 * c
        elif n == 4:
            fr = fr + 0.625 * c * (s2 * (35.0 * s2 - 30.0) + 3.0)
            b_even = b_even + 2.5 * c * (7.0 * s2 - 3.0)
        else:
            if si is None:
                if cons(si2) < 1e-28:
                    raise SingularityError("odd zonal normal force divided by sin(i) = 0",
                                           element="i")
                si = sqrt(si2)
            s = si * su
            has_odd = True
            fr = fr + 2.0 * c * s * (5.0 * s2 - 3.0)
            q_odd = q_odd + 1.5 * c * (5.0 * s2 - 1.0)
    ft = -(b_even * si2 * su) * cu
    fn_s = -b_even * su * ci
    if has_odd:
        ft = ft - q_odd * si * cu
        if abs(cons(si)) < 1e-14:
            raise SingularityError("odd zonal normal force divided by sin(i) = 0", element="i")
        fn_s = fn_s - q_odd * ci / si
    if model.has_drag:
        if vr is None or vt is None:
            raise ValueError("drag requires the orbital-frame velocity")
        w = model.omega * r
        vt_rel = vt - w * ci
        vn_rel2 = w * w * si2 * cu * cu
        vmag = sqrt(vr * vr + vt_rel * vt_rel + vn_rel2)
        kd = model.drag_k * model.air_density(r) * vmag
        fr = fr - kd * vr
        ft = ft - kd * vt_rel
        fn_s = fn_s - kd * w * cu
    fn = fn_s * si if si is not None else None
    return fr, ft, fn_s, fn


# -- drag ---------------------------------------------------------------------


def drag_rtn(model: ForceModel, r, zt, zn, vr, vt) -> RtnAcceleration:
    """Drag in the orbital frame from the inertial radial/transverse velocity."""
    w = model.omega * r
    v_t = vt - w * zn
    v_n = w * zt
    vmag = sqrt(vr * vr + v_t * v_t + v_n * v_n)
    kd = model.drag_k * model.air_density(r) * vmag
    return RtnAcceleration(-kd * vr, -kd * v_t, -kd * v_n)


def drag_accel(model: ForceModel, position, velocity):
    """Drag acceleration in inertial axes: -0.5 rho Cd A/m |V_rel| V_rel."""
    x, y, z = position
    vx, vy, vz = velocity
    w = model.omega
    ux, uy, uz = vx + w * y, vy - w * x, vz
    r = sqrt(x * x + y * y + z * z)
    vmag = sqrt(ux * ux + uy * uy + uz * uz)
    kd = model.drag_k * model.air_density(r) * vmag
    return -kd * ux, -kd * uy, -kd * uz


def vrel_ecchill(model: ForceModel, H, Hz, fhat, ghat, u):
    """Velocity relative to the rotating atmosphere in the orbital frame."""
    from .da.dmath import cos, sin
    su, cu = sin(u), cos(u)
    w_hat = 1.0 + fhat * cu + ghat * su
    r = H * H / (model.mu * w_hat)
    ci = Hz / H
    si = sqrt(1.0 - ci * ci)
    mh = model.mu / H
    return (mh * (fhat * su - ghat * cu),
            mh * w_hat - r * model.omega * ci,
            r * model.omega * si * cu)


def _as_model(m) -> ForceModel:
    if isinstance(m, ForceModel):
        return m
    if isinstance(m, ZonalField):
        return ForceModel(m)
    raise TypeError(f"expected ForceModel or ZonalField, got {type(m).__name__}")
