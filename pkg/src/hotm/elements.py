"""Orbital element sets and exact conversions between them.

Cartesian position/velocity is the conversion hub.  Closed-form shortcuts
are used for COE <-> MEE, COE -> Hill/EccHill and Hill <-> EccHill, which
also keeps equatorial (i = 0) and circular (e = 0) inputs usable where the
target set is regular.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import MU_EARTH, RE_EARTH, Scaling
from .errors import SingularityError

TWO_PI = 2.0 * math.pi
SIN_I_MIN = 1e-12
ECC_MIN = 1e-12
RHO_MIN = 1e-9 * RE_EARTH


class ElementSet(str, Enum):
    COE = "coe"
    MEE = "mee"
    HILL = "hill"
    ECCHILL = "ecchill"
    CYL = "cyl"
    CYLHZ = "cylhz"
    IDEAL = "ideal"
    CARTESIAN = "cartesian"

    @classmethod
    def parse(cls, name: "str | ElementSet") -> "ElementSet":
        if isinstance(name, ElementSet):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown element set {name!r}")

    @property
    def fields(self) -> tuple[str, ...]:
        return FIELDS[self]

    @property
    def dim(self) -> int:
        return len(FIELDS[self])

    @property
    def fast_index(self) -> int | None:
        """Index of the fast angle used as independent variable (None: time)."""
        return FAST_INDEX[self]

    @property
    def fast_name(self) -> str:
        i = FAST_INDEX[self]
        return "t" if i is None else FIELDS[self][i]


FIELDS: dict[ElementSet, tuple[str, ...]] = {
    ElementSet.COE: ("a", "e", "i", "raan", "argp", "nu"),
    ElementSet.MEE: ("p", "f", "g", "h", "k", "L"),
    ElementSet.HILL: ("r", "u", "raan", "rdot", "H", "Hz"),
    ElementSet.ECCHILL: ("H", "Hz", "fhat", "ghat", "raan", "u"),
    ElementSet.CYL: ("rho", "phi", "z", "rhodot", "phidot", "zdot"),
    ElementSet.CYLHZ: ("rho", "phi", "z", "rhodot", "Hz", "zdot"),
    ElementSet.IDEAL: ("l1", "l2", "l3", "l4", "H", "C", "S", "theta"),
    ElementSet.CARTESIAN: ("x", "y", "z", "vx", "vy", "vz"),
}

# conventional symbols for reports
SYMBOLS = {
    "raan": "Ω", "argp": "ω", "nu": "ν", "phidot": "φ̇", "rhodot": "ρ̇", "rho": "ρ",
    "phi": "φ", "fhat": "f̂", "ghat": "ĝ", "l1": "λ1", "l2": "λ2", "l3": "λ3",
    "l4": "λ4", "theta": "θ", "rdot": "ṙ", "zdot": "ż",
}

FAST_INDEX: dict[ElementSet, int | None] = {
    ElementSet.COE: 5, ElementSet.MEE: 5, ElementSet.HILL: 1, ElementSet.ECCHILL: 5,
    ElementSet.IDEAL: 7, ElementSet.CYL: None, ElementSet.CYLHZ: None,
    ElementSet.CARTESIAN: None,
}

# physical dimension of each field: L length, V velocity, A angle, N pure number,
# M angular momentum (L V), W angular rate (1/T)
UNITS: dict[ElementSet, str] = {
    ElementSet.COE: "LNAAAA",
    ElementSet.MEE: "LNNNNA",
    ElementSet.HILL: "LAAVMM",
    ElementSet.ECCHILL: "MMNNAA",
    ElementSet.CYL: "LALVWV",
    ElementSet.CYLHZ: "LALVMV",
    ElementSet.IDEAL: "NNNNMVVA",
    ElementSet.CARTESIAN: "LLLVVV",
}

ANGLE_FIELDS = {s: tuple(i for i, u in enumerate(UNITS[s]) if u == "A") for s in ElementSet}


def unit_factors(es: ElementSet, sc: Scaling) -> np.ndarray:
    """Multiply scaled values by these factors to obtain km/s units."""
    f = {"L": sc.length, "V": sc.velocity, "A": 1.0, "N": 1.0, "M": sc.angmom,
         "W": 1.0 / sc.time}
    return np.array([f[u] for u in UNITS[es]])


def wrap_angle(x: float) -> float:
    y = math.fmod(x, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    if y >= TWO_PI:  # fmod of values just below a multiple of 2 pi
        y = 0.0
    return y


@dataclass(frozen=True)
class ElementState:
    """Osculating state in one element set plus epoch.

    Values are in km, km/s, km^2/s, rad and rad/s.  Ideal states carry the
    departure-frame rotation ``frame`` (inertial <- departure).
    """

    set: ElementSet
    values: np.ndarray
    epoch: float = 0.0
    frame: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "set", ElementSet.parse(self.set))
        v = np.array(self.values, dtype=float)
        if v.shape != (self.set.dim,):
            raise ValueError(f"{self.set.value} state needs {self.set.dim} values, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.set is ElementSet.IDEAL:
            if self.frame is None:
                raise ValueError("ideal state needs its departure frame")
            nrm = float(np.sum(v[:4] ** 2))
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError(f"ideal quaternion norm {math.sqrt(nrm):.12f} is not 1")
            fr = np.array(self.frame, dtype=float)
            fr.flags.writeable = False
            object.__setattr__(self, "frame", fr)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.set.fields.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.set.fields, (float(x) for x in self.values)))

    def replace(self, values=None, epoch=None) -> "ElementState":
        return ElementState(self.set, self.values if values is None else values,
                            self.epoch if epoch is None else epoch, self.frame)

    def normalized(self) -> "ElementState":
        v = self.values.copy()
        for i in ANGLE_FIELDS[self.set]:
            v[i] = wrap_angle(v[i])
        return self.replace(v)


# -- rotations -----------------------------------------------------------------


def rot1(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot3(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orbital_axes(raan: float, inc: float, u: float) -> np.ndarray:
    """Columns: radial, transverse, normal unit vectors in inertial axes."""
    return rot3(raan) @ rot1(inc) @ rot3(u)


def departure_frame(raan0: float, inc0: float, u0: float) -> np.ndarray:
    return orbital_axes(raan0, inc0, u0)


def quaternion_matrix(l1, l2, l3, l4):
    """Rotation matrix of the unit quaternion (l1, l2, l3 | l4), as nested lists.

    Works on floats and truncated polynomials.
    """
    return [
        [1.0 - 2.0 * (l2 * l2 + l3 * l3), 2.0 * (l1 * l2 - l3 * l4), 2.0 * (l1 * l3 + l2 * l4)],
        [2.0 * (l1 * l2 + l3 * l4), 1.0 - 2.0 * (l1 * l1 + l3 * l3), 2.0 * (l2 * l3 - l1 * l4)],
        [2.0 * (l1 * l3 - l2 * l4), 2.0 * (l2 * l3 + l1 * l4), 1.0 - 2.0 * (l1 * l1 + l2 * l2)],
    ]


def ideal_frames(state: ElementState) -> np.ndarray:
    """Rotation taking orbital-frame (r, t, n) vectors to inertial axes."""
    if state.set is not ElementSet.IDEAL:
        raise ValueError("ideal_frames needs an ideal-element state")
    l1, l2, l3, l4 = state.values[:4]
    nrm = l1 * l1 + l2 * l2 + l3 * l3 + l4 * l4
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError("quaternion is not unit")
    q = np.array(quaternion_matrix(l1, l2, l3, l4))
    return state.frame @ q @ rot3(state.values[7])


# -- to Cartesian -------------------------------------------------------------


def _check_closed(e: float) -> None:
    if not e < 1.0:
        raise SingularityError(f"eccentricity {e} >= 1: only closed orbits are supported",
                               element="e")


def _rv_from_polar(axes: np.ndarray, r: float, vr: float, vt: float):
    return r * axes[:, 0], vr * axes[:, 0] + vt * axes[:, 1]


def to_cartesian(state: ElementState, mu: float = MU_EARTH) -> tuple[np.ndarray, np.ndarray]:
    """Inertial position (km) and velocity (km/s)."""
    es, x = state.set, state.values
    if es is ElementSet.CARTESIAN:
        return x[:3].copy(), x[3:].copy()
    if es is ElementSet.COE:
        a, e, inc, raan, argp, nu = x
        _check_closed(e)
        p = a * (1.0 - e * e)
        if p <= 0.0:
            raise SingularityError("semi-latus rectum must be positive", element="a")
        r = p / (1.0 + e * math.cos(nu))
        sq = math.sqrt(mu / p)
        return _rv_from_polar(orbital_axes(raan, inc, argp + nu), r,
                              sq * e * math.sin(nu), sq * (1.0 + e * math.cos(nu)))
    if es is ElementSet.MEE:
        p, f, g, h, k, L = x
        s2 = 1.0 + h * h + k * k
        fv = np.array([1.0 - k * k + h * h, 2.0 * h * k, -2.0 * k]) / s2
        gv = np.array([2.0 * h * k, 1.0 + k * k - h * h, 2.0 * h]) / s2
        cL, sL = math.cos(L), math.sin(L)
        w = 1.0 + f * cL + g * sL
        if w <= 0.0 or p <= 0.0:
            raise SingularityError("w and p must be positive", element="p")
        r = p / w
        sq = math.sqrt(mu / p)
        return r * (cL * fv + sL * gv), sq * (-(g + sL) * fv + (f + cL) * gv)
    if es is ElementSet.HILL:
        r, u, raan, rdot, H, Hz = x
        ci = Hz / H
        inc = math.acos(max(-1.0, min(1.0, ci)))
        return _rv_from_polar(orbital_axes(raan, inc, u), r, rdot, H / r)
    if es is ElementSet.ECCHILL:
        H, Hz, fh, gh, raan, u = x
        _check_closed(math.hypot(fh, gh))
        cu, su = math.cos(u), math.sin(u)
        w = 1.0 + fh * cu + gh * su
        r = H * H / (mu * w)
        inc = math.acos(max(-1.0, min(1.0, Hz / H)))
        return _rv_from_polar(orbital_axes(raan, inc, u), r, mu / H * (fh * su - gh * cu),
                              mu / H * w)
    if es in (ElementSet.CYL, ElementSet.CYLHZ):
        rho, phi, z, rhodot, q, zdot = x
        phidot = q if es is ElementSet.CYL else q / (rho * rho)
        c, s = math.cos(phi), math.sin(phi)
        pos = np.array([rho * c, rho * s, z])
        vel = np.array([rhodot * c - rho * phidot * s, rhodot * s + rho * phidot * c, zdot])
        return pos, vel
    if es is ElementSet.IDEAL:
        H, Cc, Ss, th = x[4:]
        ct, st = math.cos(th), math.sin(th)
        r = H / (mu / H + Cc * ct + Ss * st)
        rdot = Cc * st - Ss * ct
        return _rv_from_polar(ideal_frames(state), r, rdot, H / r)
    raise ValueError(f"unsupported set {es}")


# -- from Cartesian -----------------------------------------------------------


def _node_geometry(rv: np.ndarray, vv: np.ndarray):
    hv = np.cross(rv, vv)
    H = float(np.linalg.norm(hv))
    if H == 0.0:
        raise SingularityError("zero angular momentum (rectilinear motion)", element="H")
    n = hv / H
    sin_i = math.hypot(n[0], n[1])
    return hv, H, n, sin_i


def _node_axes(n: np.ndarray, sin_i: float, element: str = "raan"):
    if sin_i < SIN_I_MIN:
        raise SingularityError(
            f"inclination too close to 0 or 180 deg (sin i = {sin_i:.2e}): node undefined",
            element=element)
    raan = math.atan2(n[0], -n[1])
    node = np.array([math.cos(raan), math.sin(raan), 0.0])
    return raan, node, np.cross(n, node)


def _ecc_vector(rv, vv, mu):
    r = float(np.linalg.norm(rv))
    return ((vv @ vv - mu / r) * rv - (rv @ vv) * vv) / mu


def from_cartesian(es: ElementSet | str, rv, vv, mu: float = MU_EARTH, epoch: float = 0.0,
                   frame: np.ndarray | None = None) -> ElementState:
    """Elements of set ``es`` from inertial position/velocity.

    ``frame`` is the departure frame for ideal elements; if omitted, the
    frame is fixed at the current orbital axes (identity quaternion, zero
    ideal angle).
    """
    es = ElementSet.parse(es)
    rv = np.asarray(rv, dtype=float)
    vv = np.asarray(vv, dtype=float)
    r = float(np.linalg.norm(rv))
    if es is ElementSet.CARTESIAN:
        return ElementState(es, np.concatenate([rv, vv]), epoch)
    if es in (ElementSet.CYL, ElementSet.CYLHZ):
        rho = math.hypot(rv[0], rv[1])
        if rho < RHO_MIN:
            raise SingularityError(f"rho = {rho:.3e} km: azimuth undefined on the polar axis",
                                   element="phi")
        phi = wrap_angle(math.atan2(rv[1], rv[0]))
        rhodot = (rv[0] * vv[0] + rv[1] * vv[1]) / rho
        hz = rv[0] * vv[1] - rv[1] * vv[0]
        q = hz / (rho * rho) if es is ElementSet.CYL else hz
        return ElementState(es, [rho, phi, rv[2], rhodot, q, vv[2]], epoch)

    hv, H, n, sin_i = _node_geometry(rv, vv)
    ev = _ecc_vector(rv, vv, mu)
    e = float(np.linalg.norm(ev))
    _check_closed(e)
    rhat = rv / r
    if es is ElementSet.MEE:
        if 1.0 + n[2] < 1e-12:
            raise SingularityError("retrograde equatorial orbit: MEE singular", element="h")
        h = -n[1] / (1.0 + n[2])
        k = n[0] / (1.0 + n[2])
        s2 = 1.0 + h * h + k * k
        fv = np.array([1.0 - k * k + h * h, 2.0 * h * k, -2.0 * k]) / s2
        gv = np.array([2.0 * h * k, 1.0 + k * k - h * h, 2.0 * h]) / s2
        L = wrap_angle(math.atan2(rv @ gv, rv @ fv))
        return ElementState(es, [H * H / mu, ev @ fv, ev @ gv, h, k, L], epoch)
    if es is ElementSet.IDEAL:
        return _ideal_from_cartesian(rv, vv, mu, epoch, frame, H, n)

    raan, node, node_perp = _node_axes(n, sin_i)
    inc = math.atan2(sin_i, n[2])
    u = wrap_angle(math.atan2(rhat @ node_perp, rhat @ node))
    if es is ElementSet.HILL:
        return ElementState(es, [r, u, wrap_angle(raan), rhat @ vv, H, hv[2]], epoch)
    if es is ElementSet.ECCHILL:
        return ElementState(es, [H, hv[2], ev @ node, ev @ node_perp, wrap_angle(raan), u],
                            epoch)
    if es is ElementSet.COE:
        if e < ECC_MIN:
            raise SingularityError(f"eccentricity {e:.2e}: argument of pericentre undefined",
                                   element="argp")
        argp = wrap_angle(math.atan2(ev @ node_perp, ev @ node))
        nu = wrap_angle(math.atan2(np.cross(ev, rhat) @ n, ev @ rhat))
        a = 1.0 / (2.0 / r - vv @ vv / mu)
        return ElementState(es, [a, e, inc, wrap_angle(raan), argp, nu], epoch)
    raise ValueError(f"unsupported set {es}")


def _ideal_from_cartesian(rv, vv, mu, epoch, frame, H, n):
    r = float(np.linalg.norm(rv))
    if frame is None:
        t = np.cross(n, rv / r)
        frame = np.column_stack([rv / r, t, n])
    frame = np.asarray(frame, dtype=float)
    nd = frame.T @ n
    sin_ii = math.hypot(nd[0], nd[1])
    ii = math.atan2(sin_ii, nd[2])
    # gauge: sigma = -Omega so that l3 = 0
    om = math.atan2(nd[0], -nd[1]) if sin_ii > 1e-15 else 0.0
    l1 = math.sin(ii / 2) * math.cos(om)
    l2 = math.sin(ii / 2) * math.sin(om)
    l3 = 0.0
    l4 = math.cos(ii / 2)
    q = np.array(quaternion_matrix(l1, l2, l3, l4))
    ri = q.T @ (frame.T @ rv)
    theta = math.atan2(ri[1], ri[0])
    rdot = rv @ vv / r
    ct, st = math.cos(theta), math.sin(theta)
    ecc_term = H / r - mu / H
    C = ecc_term * ct + rdot * st
    S = ecc_term * st - rdot * ct
    return ElementState(ElementSet.IDEAL, [l1, l2, l3, l4, H, C, S, theta], epoch, frame)


# -- direct shortcuts ---------------------------------------------------------


def _coe_to(target: ElementSet, x, mu):
    a, e, inc, raan, argp, nu = x
    _check_closed(e)
    p = a * (1.0 - e * e)
    if target is ElementSet.MEE:
        t = math.tan(inc / 2.0)
        lp = raan + argp
        return [p, e * math.cos(lp), e * math.sin(lp), t * math.cos(raan), t * math.sin(raan),
                wrap_angle(lp + nu)]
    if abs(math.sin(inc)) < SIN_I_MIN:
        raise SingularityError("inclination 0 or 180 deg: node undefined", element="raan")
    H = math.sqrt(mu * p)
    u = wrap_angle(argp + nu)
    if target is ElementSet.HILL:
        r = p / (1.0 + e * math.cos(nu))
        return [r, u, raan, math.sqrt(mu / p) * e * math.sin(nu), H, H * math.cos(inc)]
    if target is ElementSet.ECCHILL:
        return [H, H * math.cos(inc), e * math.cos(argp), e * math.sin(argp), raan, u]
    return None


def _mee_to_coe(x, mu):
    p, f, g, h, k, L = x
    e = math.hypot(f, g)
    _check_closed(e)
    if e < ECC_MIN:
        raise SingularityError(f"eccentricity {e:.2e}: argument of pericentre undefined",
                               element="argp")
    tan_half = math.hypot(h, k)
    inc = 2.0 * math.atan(tan_half)
    if math.sin(inc) < SIN_I_MIN:
        raise SingularityError("inclination 0: node undefined", element="raan")
    raan = math.atan2(k, h)
    lp = math.atan2(g, f)
    return [p / (1.0 - e * e), e, inc, wrap_angle(raan), wrap_angle(lp - raan),
            wrap_angle(L - lp)]


def _hill_to_ecchill(x, mu):
    r, u, raan, rdot, H, Hz = x
    w = H * H / (mu * r)
    es = rdot * H / mu
    cu, su = math.cos(u), math.sin(u)
    return [H, Hz, (w - 1.0) * cu + es * su, (w - 1.0) * su - es * cu, raan, u]


def _ecchill_to_hill(x, mu):
    H, Hz, fh, gh, raan, u = x
    cu, su = math.cos(u), math.sin(u)
    w = 1.0 + fh * cu + gh * su
    return [H * H / (mu * w), u, raan, mu / H * (fh * su - gh * cu), H, Hz]


def convert(state: ElementState, target: ElementSet | str, mu: float = MU_EARTH,
            frame: np.ndarray | None = None) -> ElementState:
    """Same physical state expressed in another element set.

    ``frame`` overrides the departure frame when the target is ``IDEAL``.
    """
    target = ElementSet.parse(target)
    src = state.set
    x = state.values
    if src is target and (target is not ElementSet.IDEAL or frame is None):
        return state
    vals = None
    if src is ElementSet.COE and target in (ElementSet.MEE, ElementSet.HILL, ElementSet.ECCHILL):
        vals = _coe_to(target, x, mu)
    elif src is ElementSet.MEE and target is ElementSet.COE:
        vals = _mee_to_coe(x, mu)
    elif src is ElementSet.HILL and target is ElementSet.ECCHILL:
        vals = _hill_to_ecchill(x, mu)
    elif src is ElementSet.ECCHILL and target is ElementSet.HILL:
        vals = _ecchill_to_hill(x, mu)
    if vals is not None:
        return ElementState(target, vals, state.epoch)
    if target is ElementSet.IDEAL and frame is None and src is ElementSet.COE:
        a, e, inc, raan, argp, nu = x
        frame = departure_frame(raan, inc, argp + nu)
    rv, vv = to_cartesian(state, mu)
    return from_cartesian(target, rv, vv, mu, state.epoch, frame)


def state_from_coe(target: ElementSet | str, coe, mu: float = MU_EARTH,
                   epoch: float = 0.0) -> ElementState:
    """Convenience: state in ``target`` from (a, e, i, raan, argp, nu) in km/rad."""
    return convert(ElementState(ElementSet.COE, coe, epoch), target, mu)


# -- physical invariants ------------------------------------------------------


def energy(state: ElementState, mu: float = MU_EARTH) -> float:
    """Keplerian specific energy v^2/2 - mu/r."""
    rv, vv = to_cartesian(state, mu)
    return float(vv @ vv / 2.0 - mu / np.linalg.norm(rv))


def angular_momentum(state: ElementState, mu: float = MU_EARTH) -> np.ndarray:
    rv, vv = to_cartesian(state, mu)
    return np.cross(rv, vv)


# -- scaling ------------------------------------------------------------------


def scale_values(es: ElementSet, values, sc: Scaling) -> np.ndarray:
    return np.asarray(values, dtype=float) / unit_factors(es, sc)


def unscale_values(es: ElementSet, values, sc: Scaling) -> np.ndarray:
    return np.asarray(values, dtype=float) * unit_factors(es, sc)


# -- CSV exchange -------------------------------------------------------------


def states_to_csv(states: list[ElementState]) -> str:
    """One row per state; header ``epoch`` followed by the set's field names."""
    if not states:
        raise ValueError("no states")
    es = states[0].set
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch",) + es.fields)
    for s in states:
        if s.set is not es:
            raise ValueError("all states in one CSV must share an element set")
        w.writerow([repr(float(s.epoch))] + [repr(float(v)) for v in s.values])
    return buf.getvalue()


def states_from_csv(text: str, frame: np.ndarray | None = None) -> list[ElementState]:
    rows = list(csv.reader(io.StringIO(text)))
    header = tuple(rows[0])
    for es in ElementSet:
        if header[1:] == es.fields:
            break
    else:
        raise ValueError(f"header {header} does not match any element set")
    return [ElementState(es, [float(v) for v in row[1:]], float(row[0]), frame)
            for row in rows[1:] if row]
