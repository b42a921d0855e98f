"""Fixed points of eccentric-Hill transfer maps and invariant-curve sweeps.

Working at the ascending node of an axially symmetric field, the energy
``E`` and the polar angular momentum ``Hz`` are first integrals.  Holding
both fixed leaves the eccentricity vector (f̂, ĝ) as the free pair: ``H`` is
recovered from (E, Hz, f̂, ĝ) through the energy at the node.  A fixed point
of the reduced map is a frozen (periodic) orbit; displacing its
eccentricity at constant (E, Hz) traces quasi-periodic invariant curves in
the (r, V_r) section.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .da import DaContext, make_variable
from .elements import ElementSet, ElementState
from .errors import ConfigError, IntegrationError
from .forces import DragConfig, ForceModel
from .harness import MappingRun, iterate
from .maps import DEFAULT_ORDER, STROBOSCOPIC, TransferMap, build_from_state

_H, _HZ, _F, _G, _RAAN, _U = range(6)


# -- energy at the section -------------------------------------------------------------


def node_energy(model: ForceModel, H, Hz, fhat, ghat, u=0.0):
    """Specific energy (Keplerian plus zonal) of an eccentric-Hill state.

    Works on floats and on DA polynomials (``u`` must be a float).  Units
    follow ``model``.
    """
    mu = model.mu
    cu, su = math.cos(u), math.sin(u)
    w = 1.0 + fhat * cu + ghat * su
    r = H * H / (mu * w)
    kep = mu * mu * (fhat * fhat + ghat * ghat - 1.0) / (2.0 * H * H)
    if su == 0.0:
        s = 0.0
    else:
        ci = Hz / H
        s = (1.0 - ci * ci).sqrt() * su if hasattr(ci, "sqrt") else math.sqrt(1.0 - ci * ci) * su
    return kep + model.potential(r, s)


def _energy_jet(model, H, Hz, f, g, u):
    """E and its partials with respect to (H, f̂, ĝ)."""
    ctx = DaContext(1, 3)
    e = node_energy(model, make_variable(ctx, 0, H), Hz, make_variable(ctx, 1, f),
                    make_variable(ctx, 2, g), u)
    return e.cons, e.linear()


def solve_h(model: ForceModel, energy: float, Hz: float, fhat: float, ghat: float,
            u: float = 0.0, tol: float = 1e-15) -> float:
    """Angular momentum ``H`` giving energy ``energy`` at the section.

    Newton from the Keplerian value ``mu sqrt((1 - e²) / (-2E))``.
    """
    e2 = fhat * fhat + ghat * ghat
    if energy >= 0.0 or e2 >= 1.0:
        raise ConfigError("fixed energy requires a bound, closed orbit")
    H = model.mu * math.sqrt((1.0 - e2) / (-2.0 * energy))
    for _ in range(50):
        val, grad = _energy_jet(model, H, Hz, fhat, ghat, u)
        dH = (val - energy) / grad[0]
        H -= dH
        if abs(dH) <= tol * H:
            return H
    raise IntegrationError("angular momentum for the requested energy did not converge")


# -- fixed point -----------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointProblem:
    """Reduced fixed-point problem on an eccentric-Hill stroboscopic map.

    ``energy`` (km²/s²) and ``hz`` (km²/s) are held fixed; the unknowns are
    (f̂, ĝ).  The map's fast angle value is the section.
    """

    tmap: TransferMap
    energy: float
    hz: float
    tol: float = 1e-12
    max_iter: int = 25

    def __post_init__(self):
        if self.tmap.element_set is not ElementSet.ECCHILL or self.tmap.kind != STROBOSCOPIC:
            raise ConfigError("fixed-point problems need an eccentric-Hill stroboscopic map")

    @classmethod
    def from_map(cls, tmap: TransferMap, **kw) -> "FixedPointProblem":
        """Fix E and Hz at the map's own expansion state."""
        x = tmap.x0
        E = node_energy(tmap.model, x[_H], x[_HZ], x[_F], x[_G], x[_U])
        sc = tmap.scaling
        return cls(tmap, float(E * sc.velocity ** 2), float(x[_HZ] * sc.angmom), **kw)

    @property
    def section(self) -> float:
        return float(self.tmap.x0[_U])

    def scaled_invariants(self) -> tuple[float, float]:
        sc = self.tmap.scaling
        return self.energy / sc.velocity ** 2, self.hz / sc.angmom

    def state(self, fhat: float, ghat: float) -> np.ndarray:
        """Scaled eccentric-Hill state on the section with the fixed invariants."""
        E, hz = self.scaled_invariants()
        x = np.array(self.tmap.x0, dtype=float)
        x[_H] = solve_h(self.tmap.model, E, hz, fhat, ghat, self.section)
        x[_HZ] = hz
        x[_F] = fhat
        x[_G] = ghat
        return x

    def residual(self, fhat: float, ghat: float) -> np.ndarray:
        x = self.state(fhat, ghat)
        new, _ = self.tmap.step(x)
        return new[[_F, _G]] - x[[_F, _G]]

    def jacobian(self, fhat: float, ghat: float) -> np.ndarray:
        """d(residual)/d(f̂, ĝ) from exact derivatives of the map polynomials."""
        tm = self.tmap
        E, hz = self.scaled_invariants()
        x = self.state(fhat, ghat)
        delta = tm.displacement(x)
        _, grad = _energy_jet(tm.model, x[_H], hz, fhat, ghat, self.section)
        dh = -grad[1:] / grad[0]  # dH/d(f̂, ĝ) along the energy surface
        var = {e: j for j, e in enumerate(tm.dvars)}
        jac = np.empty((2, 2))
        for row, comp in enumerate((_F, _G)):
            p = tm.state[comp]
            d = {e: p.derive(var[e]).evaluate(delta) for e in (_H, _F, _G)}
            jac[row, 0] = d[_H] * dh[0] + d[_F]
            jac[row, 1] = d[_H] * dh[1] + d[_G]
        return jac - np.eye(2)


@dataclass(frozen=True)
class FixedPoint:
    """Converged fixed point in physical units.

    ``iterations`` counts residual evaluations of the Newton loop,
    including the converged one.
    """

    fhat: float
    ghat: float
    H: float
    hz: float
    energy: float
    iterations: int
    residual: float
    state: ElementState

    @property
    def eccentricity(self) -> float:
        return math.hypot(self.fhat, self.ghat)

    @property
    def argp_deg(self) -> float:
        return math.degrees(math.atan2(self.ghat, self.fhat)) % 360.0


def find_fixed_point(problem: FixedPointProblem, guess=None) -> FixedPoint:
    """Damped Newton iteration for f̂, ĝ with T(X) = X on the section.

    Parameters
    ----------
    problem : FixedPointProblem
    guess : (float, float), optional
        Starting (f̂, ĝ); defaults to the map's expansion point.

    Raises
    ------
    IntegrationError
        No convergence within ``problem.max_iter`` iterations or singular
        reduced Jacobian.
    """
    tm = problem.tmap
    z = np.array(tm.x0[[_F, _G]] if guess is None else guess, dtype=float)
    res = problem.residual(*z)
    norm = float(np.max(np.abs(res)))
    for it in range(1, problem.max_iter + 1):
        if norm <= problem.tol:
            x = problem.state(*z)
            st = tm.element_state(x)
            sc = tm.scaling
            return FixedPoint(float(z[0]), float(z[1]), float(x[_H] * sc.angmom), problem.hz,
                              problem.energy, it, norm, st)
        jac = problem.jacobian(*z)
        if abs(np.linalg.det(jac)) < 1e-300 or not np.all(np.isfinite(jac)):
            raise IntegrationError("singular reduced Jacobian in the fixed-point iteration")
        step = np.linalg.solve(jac, -res)
        lam = 1.0
        for _ in range(30):
            trial = z + lam * step
            try:
                r_trial = problem.residual(*trial)
                n_trial = float(np.max(np.abs(r_trial)))
            except (ConfigError, IntegrationError):
                n_trial = math.inf
            if n_trial < norm or n_trial <= problem.tol:
                break
            lam *= 0.5
        else:
            raise IntegrationError("damped Newton step failed to reduce the residual")
        z, res, norm = trial, r_trial, n_trial
    raise IntegrationError(f"fixed-point iteration did not converge in {problem.max_iter} "
                           f"iterations (residual {norm:.3e})")


def fixed_point_map(fp: FixedPoint, model_km: ForceModel, order: int = DEFAULT_ORDER,
                    **kw) -> TransferMap:
    """Eccentric-Hill map expanded about a fixed point (any force model)."""
    return build_from_state(fp.state, model_km, order, **kw)


# -- invariant curves ---------------------------------------------------------------


@dataclass
class SectionCurve:
    """Section crossings of one mapped orbit."""

    label: str
    offset: float
    run: MappingRun
    r_km: np.ndarray
    vr_kms: np.ndarray
    epoch_s: np.ndarray

    @property
    def revs(self) -> np.ndarray:
        return np.arange(len(self.r_km))

    def windowed_mean_r(self, window: int = 100) -> np.ndarray:
        """Mean r over consecutive, non-overlapping windows of crossings."""
        n = len(self.r_km) // window
        return self.r_km[: n * window].reshape(n, window).mean(axis=1)


@dataclass
class SectionCloud:
    """(r, V_r) samples at the section for a family of invariant curves."""

    curves: list[SectionCurve] = field(default_factory=list)
    header: str = ""

    def __post_init__(self):
        labels = [c.label for c in self.curves]
        if len(set(labels)) != len(labels):
            raise ValueError("curve labels must be unique")

    def __len__(self) -> int:
        return len(self.curves)

    def __getitem__(self, i) -> SectionCurve:
        return self.curves[i]

    def to_csv(self) -> str:
        out = io.StringIO()
        if self.header:
            out.write(f"# {self.header}\n")
        out.write("curve_label,rev,r_km,vr_kms,epoch_s\n")
        for c in self.curves:
            for k in range(len(c.r_km)):
                out.write(f"{c.label},{k},{c.r_km[k]:.10f},{c.vr_kms[k]:.12e},"
                          f"{c.epoch_s[k]:.6f}\n")
        return out.getvalue()


def section_r_vr(tmap: TransferMap, states) -> tuple[np.ndarray, np.ndarray]:
    """Radius (km) and radial velocity (km/s) of scaled eccentric-Hill states."""
    x = np.asarray(states, dtype=float)
    mu = tmap.model.mu
    H, f, g, u = x[:, _H], x[:, _F], x[:, _G], x[:, _U]
    cu, su = np.cos(u), np.sin(u)
    r = H * H / (mu * (1.0 + f * cu + g * su))
    vr = mu / H * (f * su - g * cu)
    sc = tmap.scaling
    return r * sc.length, vr * sc.velocity


def section_invariants(tmap: TransferMap, states) -> tuple[np.ndarray, np.ndarray]:
    """Energy (km²/s²) and Hz (km²/s) of scaled eccentric-Hill states."""
    x = np.asarray(states, dtype=float)
    sc = tmap.scaling
    E = np.array([node_energy(tmap.model, *s[[_H, _HZ, _F, _G, _U]]) for s in x])
    return E * sc.velocity ** 2, x[:, _HZ] * sc.angmom


def sweep_invariant_curves(tmap: TransferMap, fp: FixedPoint, offsets, m: int,
                           safety: bool = True, refine: bool = True) -> SectionCloud:
    """Map orbits whose eccentricity is displaced from the fixed point.

    Each curve starts on the section with eccentricity ``e* + offset``, the
    fixed point's argument of perigee and the same (E, Hz); ``H`` follows
    from the energy.  The map is applied ``m`` times.  With ``refine`` the
    fixed point is first re-solved on ``tmap`` itself, so a zero offset
    stays on the map's own periodic orbit.
    """
    if tmap.element_set is not ElementSet.ECCHILL or tmap.kind != STROBOSCOPIC:
        raise ConfigError("sweeps need an eccentric-Hill stroboscopic map")
    problem = FixedPointProblem(tmap, fp.energy, fp.hz)
    if refine and not tmap.model.has_drag:
        fp = find_fixed_point(problem, (fp.fhat, fp.ghat))
    w = math.atan2(fp.ghat, fp.fhat)
    curves = []
    for off in offsets:
        e = fp.eccentricity + off
        if not 0.0 <= e < 1.0:
            raise ConfigError(f"offset {off} gives eccentricity {e} outside [0, 1)")
        x0 = problem.state(e * math.cos(w), e * math.sin(w))
        run = iterate(tmap, m, x0, safety=safety)
        r, vr = section_r_vr(tmap, run.states)
        curves.append(SectionCurve(f"de={off:g}", float(off), run, r, vr, run.epochs_s))
    sc = tmap.scaling
    header = (f"mu={tmap.model.mu * sc.mu} re={tmap.model.re * sc.length} "
              f"j={','.join(repr(j) for j in tmap.model.j)} "
              f"drag={'on' if tmap.model.has_drag else 'off'} "
              f"E={float(fp.energy)!r} Hz={float(fp.hz)!r} fhat*={fp.fhat!r} ghat*={fp.ghat!r}")
    return SectionCloud(curves, header)


def sweep_with_drag(fp: FixedPoint, model_km: ForceModel, offsets, m: int = 2000,
                    drag: DragConfig | None = None, order: int = DEFAULT_ORDER,
                    safety: bool = True) -> tuple[TransferMap, SectionCloud]:
    """Sweep with a map that includes atmospheric drag.

    The map is expanded about the conservative fixed point with ``drag``
    (default parameters when omitted) added to ``model_km``.
    """
    dm = model_km.with_drag(drag or DragConfig())
    tm = fixed_point_map(fp, dm, order)
    return tm, sweep_invariant_curves(tm, fp, offsets, m, safety)
