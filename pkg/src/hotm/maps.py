"""High-order stroboscopic and Poincaré transfer maps.

A :class:`TransferMap` advances a state in one element set by one
revolution.  Stroboscopic maps (sets with a fast angle) are Taylor
expansions of the flow over exactly 2π of the fast variable; the fast angle
itself is not a DA variable.  Cylindrical sets use a Poincaré section at
the ascending equator crossing (z = 0, ż > 0), built in two stages: a
fixed-duration expansion in (state, period) followed by a partial
inversion of ``z_f = 0`` for the period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .constants import Scaling
from .da import (
    DaContext,
    DomainEstimate,
    PolynomialMap,
    TruncatedPolynomial,
    estimate_domain,
    make_variable,
    partial_invert,
)
from .dynamics import Formulation, OdeSystem
from .elements import TWO_PI, ElementSet, ElementState, scale_values, unscale_values
from .errors import ConfigError, SingularityError
from .forces import DragConfig, ForceModel, ZonalField
from .integrator import IntegratorConfig, integrate, integrate_to_event

DEFAULT_ORDER = 5
DEFAULT_EPS = 1e-9
SAFETY_EPS = 1e-4
FORMAT_VERSION = 1

STROBOSCOPIC = "stroboscopic"
POINCARE = "poincare"


@dataclass(frozen=True)
class TransferMap:
    """One-revolution map in scaled units.

    Attributes
    ----------
    element_set : ElementSet
    kind : str
        ``"stroboscopic"`` or ``"poincare"``.
    x0 : ndarray
        Full expansion state (scaled) whose propagation was requested.
    centers : ndarray
        Expansion centres of the DA variables; equal to ``x0[dvars]`` unless
        overridden.
    dvars : tuple of int
        Element indices that are DA variables, in variable order.
    state : PolynomialMap
        One component per element of the set.
    time : TruncatedPolynomial
        Elapsed time over the revolution (scaled).
    domain, safety : DomainEstimate
        Accuracy radii at ``eps`` and the looser radii used for the hard
        abort during iteration.
    """

    element_set: ElementSet
    kind: str
    x0: np.ndarray
    centers: np.ndarray
    dvars: tuple[int, ...]
    state: PolynomialMap
    time: TruncatedPolynomial
    scaling: Scaling
    model: ForceModel
    domain: DomainEstimate
    safety: DomainEstimate
    frame: np.ndarray | None = None
    formulation: str = Formulation.AUTO.value
    _eval: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        coef = np.vstack([self.state.coef[list(self.dvars)], self.time.c[None, :]])
        coef.flags.writeable = False
        object.__setattr__(self, "_eval", coef)

    # -- basic properties ------------------------------------------------

    @property
    def order(self) -> int:
        return self.state.ctx.order

    @property
    def eps(self) -> float:
        return self.domain.eps

    @property
    def dim(self) -> int:
        return self.element_set.dim

    @property
    def variable_names(self) -> list[str]:
        f = self.element_set.fields
        return [f[i] for i in self.dvars]

    @property
    def period(self) -> float:
        """Elapsed time over one revolution at the expansion centre (scaled)."""
        return self.time.cons

    # -- evaluation ------------------------------------------------------

    def displacement(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[list(self.dvars)] - self.centers

    def step(self, x) -> tuple[np.ndarray, float]:
        """Map a full scaled state by one revolution; returns (state, elapsed time)."""
        x = np.asarray(x, dtype=float)
        delta = x[list(self.dvars)] - self.centers
        out = _kernels.eval_map(self._eval, delta, self.state.ctx.parent, self.state.ctx.pvar)
        new = x.copy()
        new[list(self.dvars)] = out[:-1]
        fast = self.element_set.fast_index
        if self.kind == STROBOSCOPIC:
            new[fast] = x[fast] + TWO_PI
        else:
            new[2] = 0.0
        return new, float(out[-1])

    def evaluate(self, delta) -> tuple[np.ndarray, float]:
        """Polynomial values at a displacement of the DA variables."""
        delta = np.asarray(delta, dtype=float)
        out = _kernels.eval_map(self._eval, delta, self.state.ctx.parent, self.state.ctx.pvar)
        return out[:-1], float(out[-1])

    def to_physical(self, x) -> np.ndarray:
        return unscale_values(self.element_set, x, self.scaling)

    def from_physical(self, x) -> np.ndarray:
        return scale_values(self.element_set, x, self.scaling)

    def element_state(self, x, epoch: float = 0.0) -> ElementState:
        """Physical-unit state from a scaled state vector and scaled epoch."""
        return ElementState(self.element_set, self.to_physical(x), epoch * self.scaling.time,
                            self.frame)

    # -- domain ------------------------------------------------------------

    def with_domain(self, eps: float) -> "TransferMap":
        return replace(self, domain=accuracy_domain(self, eps))

    # -- serialization --------------------------------------------------------

    def dumps(self) -> str:
        sc = self.scaling
        z = self.model.zonal
        dr = self.model.drag
        head = [
            f"# hotm-map version {FORMAT_VERSION}",
            f"# set {self.element_set.value}",
            f"# kind {self.kind}",
            f"# formulation {self.formulation}",
            "# x0 " + _fmt(self.x0),
            "# centers " + _fmt(self.centers),
            "# dvars " + " ".join(str(i) for i in self.dvars),
            "# scaling " + _fmt([sc.length, sc.velocity, sc.time]),
            f"# order {self.order}",
            f"# eps {self.domain.eps!r}",
            "# radii " + _fmt(self.domain.radii),
            f"# safety_eps {self.safety.eps!r}",
            "# safety_radii " + _fmt(self.safety.radii),
            "# zonal " + _fmt([z.mu, z.re, *z.j]),
            "# drag " + ("none" if dr is None else _fmt([dr.cd, dr.area_to_mass, dr.omega_e])),
            "# frame " + ("none" if self.frame is None else _fmt(np.ravel(self.frame))),
            "# begin state",
        ]
        body = self.state.dump()
        tmap = PolynomialMap.from_polys([self.time]).dump()
        return "\n".join(head) + "\n" + body + "# begin time\n" + tmap

    @classmethod
    def loads(cls, text: str) -> "TransferMap":
        head: dict[str, str] = {}
        lines = text.splitlines(keepends=True)
        i = 0
        while not lines[i].startswith("# begin state"):
            key, _, val = lines[i][2:].strip().partition(" ")
            head[key] = val
            i += 1
        if head.get("hotm-map") != f"version {FORMAT_VERSION}":
            raise ValueError("not a transfer-map file of a supported version")
        j = next(k for k in range(i, len(lines)) if lines[k].startswith("# begin time"))
        state = PolynomialMap.load("".join(lines[i + 1:j]))
        time = PolynomialMap.load("".join(lines[j + 1:]))[0]
        zon = _parse(head["zonal"])
        zonal = ZonalField(mu=zon[0], re=zon[1], j=tuple(zon[2:]))
        drag = None
        if head["drag"] != "none":
            d = _parse(head["drag"])
            drag = DragConfig(cd=d[0], area_to_mass=d[1], omega_e=d[2])
        scv = _parse(head["scaling"])
        sc = Scaling(*scv)
        frame = None if head["frame"] == "none" else _parse(head["frame"]).reshape(3, 3)
        return cls(
            element_set=ElementSet.parse(head["set"]),
            kind=head["kind"],
            x0=_parse(head["x0"]),
            centers=_parse(head["centers"]),
            dvars=tuple(int(v) for v in head["dvars"].split()),
            state=state,
            time=time,
            scaling=sc,
            model=ForceModel(zonal, drag, sc),
            domain=DomainEstimate(_parse(head["radii"]), float(head["eps"])),
            safety=DomainEstimate(_parse(head["safety_radii"]), float(head["safety_eps"])),
            frame=frame,
            formulation=head["formulation"],
        )


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _parse(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split()])


# -- building -----------------------------------------------------------------


def _domain_map(state: PolynomialMap, time: TruncatedPolynomial) -> PolynomialMap:
    return PolynomialMap(state.ctx, np.vstack([state.coef, time.c[None, :]]))


def accuracy_domain(tmap: TransferMap, eps: float = DEFAULT_EPS,
                    include_time: bool = True) -> DomainEstimate:
    """Per-variable radii, minimum over the state components and the flight time.

    With ``include_time=False`` only the state components are used; the
    flight time is what keeps a Kepler map's domain finite.
    """
    if include_time:
        return estimate_domain(_domain_map(tmap.state, tmap.time), eps)
    return estimate_domain(tmap.state, eps)


def _check_centers(es: ElementSet, dvars, centers) -> None:
    names = [es.fields[i] for i in dvars]
    d = dict(zip(names, centers))
    if es is ElementSet.ECCHILL and math.hypot(d["fhat"], d["ghat"]) >= 1.0:
        raise ConfigError("expansion centre implies e >= 1")
    if es is ElementSet.MEE and math.hypot(d["f"], d["g"]) >= 1.0:
        raise ConfigError("expansion centre implies e >= 1")
    if es is ElementSet.COE and not 0.0 < d["e"] < 1.0:
        raise ConfigError("expansion centre eccentricity must lie in (0, 1)")
    if es is ElementSet.HILL and (d["r"] <= 0.0 or abs(d["Hz"]) > abs(d["H"])):
        raise ConfigError("expansion centre is not a valid Hill state")
    if es is ElementSet.ECCHILL and (d["H"] <= 0.0 or abs(d["Hz"]) > d["H"]):
        raise ConfigError("expansion centre is not a valid EccHill state")


def _resolve_centers(es, x0, dvars, centers) -> np.ndarray:
    c = np.asarray(x0, dtype=float)[list(dvars)].copy()
    if centers:
        names = [es.fields[i] for i in dvars]
        for name, value in dict(centers).items():
            if name not in names:
                raise ConfigError(f"{name!r} is not a DA variable of {es.value}")
            c[names.index(name)] = float(value)
        _check_centers(es, dvars, c)
    return c


def build_map(element_set, x0, model: ForceModel, order: int = DEFAULT_ORDER,
              frame: np.ndarray | None = None, centers: dict | None = None,
              eps: float = DEFAULT_EPS, safety_eps: float = SAFETY_EPS,
              formulation: str = "auto", config: IntegratorConfig | None = None) -> TransferMap:
    """Stroboscopic map when the set has a fast angle, Poincaré map otherwise."""
    es = ElementSet.parse(element_set)
    if es.fast_index is None:
        if centers:
            raise ConfigError("expansion-centre overrides apply to stroboscopic maps only")
        return build_poincare_cyl(es, x0, model, order, eps, safety_eps, config)
    return build_stroboscopic(es, x0, model, order, frame, centers, eps, safety_eps,
                              formulation, config)


def build_stroboscopic(element_set, x0, model: ForceModel, order: int = DEFAULT_ORDER,
                       frame: np.ndarray | None = None, centers: dict | None = None,
                       eps: float = DEFAULT_EPS, safety_eps: float = SAFETY_EPS,
                       formulation: str = "auto",
                       config: IntegratorConfig | None = None) -> TransferMap:
    """Expand the flow over one turn of the fast angle.

    ``x0`` is the full scaled state and ``model`` a scaled force model.
    ``centers`` maps field names to overridden expansion centres.
    """
    es = ElementSet.parse(element_set)
    fast = es.fast_index
    if fast is None:
        raise ConfigError(f"{es.value} has no fast angle; use the Poincaré build")
    if order < 1:
        raise ConfigError("order must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    dvars = tuple(i for i in range(es.dim) if i != fast)
    c = _resolve_centers(es, x0, dvars, centers)
    ctx = DaContext(order, len(dvars))
    system = OdeSystem(es, model, "fast", formulation, frame)
    y0 = [make_variable(ctx, j, c[j]) for j in range(len(dvars))]
    y0.append(TruncatedPolynomial.constant(ctx, 0.0))
    s0 = float(x0[fast])
    res = integrate(system, y0, s0, s0 + TWO_PI, config)
    comps = []
    k = 0
    for i in range(es.dim):
        if i == fast:
            comps.append(TruncatedPolynomial.constant(ctx, s0 + TWO_PI))
        else:
            comps.append(res.y[k])
            k += 1
    state = PolynomialMap.from_polys(comps)
    return _finish(es, STROBOSCOPIC, x0, c, dvars, state, res.y[-1], model, frame, eps,
                   safety_eps, system.formulation.value)


def _finish(es, kind, x0, c, dvars, state, time, model, frame, eps, safety_eps, form):
    order = state.ctx.order
    if order >= 3:
        dom = estimate_domain(_domain_map(state, time), eps)
        safe = estimate_domain(_domain_map(state, time), safety_eps)
    else:
        dom = DomainEstimate(np.full(len(dvars), math.inf), eps)
        safe = DomainEstimate(np.full(len(dvars), math.inf), safety_eps)
    return TransferMap(es, kind, x0.copy(), c, dvars, state, time, model.scaling, model, dom,
                       safe, None if frame is None else np.asarray(frame, dtype=float), form)


def nodal_period(element_set, x0, model: ForceModel,
                 config: IntegratorConfig | None = None) -> tuple[float, list]:
    """Time to the next ascending equator crossing and the state there (scaled)."""
    es = ElementSet.parse(element_set)
    system = OdeSystem(es, model, "time")
    rv = np.asarray(x0, dtype=float)
    r = math.hypot(rv[0], rv[2])
    v2 = rv[3] ** 2 + rv[5] ** 2 + (rv[0] * rv[4] if es is ElementSet.CYL else rv[4] / rv[0]) ** 2
    energy = v2 / 2.0 - model.mu / r
    if energy >= 0.0:
        raise SingularityError("orbit is not bound", element="rhodot")
    a = -model.mu / (2.0 * energy)
    t_kep = TWO_PI * math.sqrt(a ** 3 / model.mu)
    cfg = config or IntegratorConfig()
    ev = integrate_to_event(system, list(rv), 0.0, 2, +1, s_max=2.0 * t_kep, config=cfg,
                            h=t_kep / 64.0)
    return ev.s, ev.y


def build_poincare_cyl(element_set, x0, model: ForceModel, order: int = DEFAULT_ORDER,
                       eps: float = DEFAULT_EPS, safety_eps: float = SAFETY_EPS,
                       config: IntegratorConfig | None = None) -> TransferMap:
    """Poincaré map at the ascending equator crossing for Cyl / CylHz.

    The DA variables are the five state components other than ``z`` plus
    the flight time; ``z`` stays pinned to the section.
    """
    es = ElementSet.parse(element_set)
    if es not in (ElementSet.CYL, ElementSet.CYLHZ):
        raise ConfigError("Poincaré builds are implemented for Cyl and CylHz")
    x0 = np.asarray(x0, dtype=float)
    if abs(x0[2]) > 1e-12:
        raise ConfigError(f"initial state must lie on z = 0 (z = {x0[2]:.3e})")
    if not x0[5] > 0.0:
        raise SingularityError("ascending crossing needs zdot > 0", element="zdot")
    tn, _ = nodal_period(es, x0, model, config)
    dvars = (0, 1, 3, 4, 5)
    nd = len(dvars)
    ctx = DaContext(order, nd + 1)
    system = OdeSystem(es, model, "time")
    y0 = []
    for i in range(es.dim):
        if i == 2:
            y0.append(TruncatedPolynomial.constant(ctx, 0.0))
        else:
            y0.append(make_variable(ctx, dvars.index(i), x0[i]))
    period = make_variable(ctx, nd, tn)

    def scaled_rhs(tau, y):
        return [period * v for v in system(tau, y)]

    res = integrate(scaled_rhs, y0, 0.0, 1.0, config)
    xf = PolynomialMap.from_polys(res.y)
    dt = partial_invert(PolynomialMap.from_polys([res.y[2]]), [nd], tol=1e-9)
    inner = PolynomialMap.identity(ctx).coef.copy()
    inner[nd] = dt.coef[0]
    inner = PolynomialMap(ctx, inner)
    state = xf.compose(inner, allow_offset=True)
    tpoly = PolynomialMap.from_polys([period]).compose(inner, allow_offset=True)[0]
    # drop the (now absent) period variable from the context
    red = DaContext(order, nd)
    state = _drop_last_variable(state, red)
    tpoly = _drop_last_variable(PolynomialMap.from_polys([tpoly]), red)[0]
    # z_f vanishes identically up to roundoff relative to its own coefficients
    zmax = float(np.max(np.abs(state.coef[2])))
    zscale = max(1.0, float(np.max(np.abs(xf.coef[2]))))
    if zmax > 1e-12 * zscale:
        raise SingularityError(f"section condition violated: max |z| coefficient {zmax:.3e}",
                               element="z")
    state = PolynomialMap(red, np.where(np.arange(es.dim)[:, None] == 2, 0.0, state.coef))
    return _finish(es, POINCARE, x0, x0[list(dvars)].copy(), dvars, state, tpoly, model, None,
                   eps, safety_eps, Formulation.GAUSS.value)


def _drop_last_variable(m: PolynomialMap, red: DaContext) -> PolynomialMap:
    ctx = m.ctx
    keep = np.flatnonzero(ctx.exponents[:, -1] == 0)
    if np.any(np.abs(np.delete(m.coef, keep, axis=1)) > 1e-15):
        raise ValueError("map still depends on the dropped variable")
    coef = np.zeros((len(m), red.size))
    for m_idx in keep:
        coef[:, red.index[tuple(int(e) for e in ctx.exponents[m_idx, :-1])]] = m.coef[:, m_idx]
    return PolynomialMap(red, coef)


# -- convenience ----------------------------------------------------------------------


def scaled_initial(state: ElementState, model: ForceModel) -> np.ndarray:
    return scale_values(state.set, state.values, model.scaling)


def build_from_state(state: ElementState, model_km: ForceModel, order: int = DEFAULT_ORDER,
                     centers: dict | None = None, eps: float = DEFAULT_EPS,
                     safety_eps: float = SAFETY_EPS, formulation: str = "auto",
                     config: IntegratorConfig | None = None) -> TransferMap:
    """Build a map from a physical-unit state and a km-unit force model.

    ``centers`` are given in physical units and scaled here.
    """
    model = model_km.scaled()
    x0 = scaled_initial(state, model)
    sc_centers = None
    if centers:
        fac = dict(zip(state.set.fields, scale_values(state.set, np.ones(state.set.dim),
                                                      model.scaling)))
        sc_centers = {k: v * fac[k] for k, v in centers.items()}
    return build_map(state.set, x0, model, order, state.frame, sc_centers, eps, safety_eps,
                     formulation, config)
