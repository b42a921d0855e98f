"""Map iteration, numerical references, error series and timing."""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import RE_EARTH, TestCase, test_case
from .dynamics import Formulation, OdeSystem
from .elements import (
    TWO_PI,
    ElementSet,
    ElementState,
    convert,
    scale_values,
    to_cartesian,
    unscale_values,
)
from .errors import DomainAbortError
from .forces import ForceModel
from .integrator import IntegratorConfig, StepStats, integrate_points, integrate_to_event
from .maps import DEFAULT_EPS, DEFAULT_ORDER, SAFETY_EPS, TransferMap, build_from_state

SAFETY_FACTOR = 10.0
ALL_SETS = (ElementSet.COE, ElementSet.IDEAL, ElementSet.MEE, ElementSet.CYL,
            ElementSet.CYLHZ, ElementSet.HILL, ElementSet.ECCHILL)


# -- initial conditions ---------------------------------------------------------


def initial_state(case: TestCase | int, element_set, coe_override: dict | None = None
                  ) -> ElementState:
    """Initial state of a test case in the requested set (physical units).

    ``coe_override`` replaces entries of the classical elements (km and
    degrees, keys as in :class:`TestCase`).
    """
    if not isinstance(case, TestCase):
        case = test_case(case)
    coe = list(case.coe_radians())
    if coe_override:
        names = ("a", "e", "i", "raan", "argp", "nu")
        for k, v in coe_override.items():
            j = names.index(k)
            coe[j] = v if j < 2 else math.radians(v)
    es = ElementSet.parse(element_set)
    st = convert(ElementState(ElementSet.COE, coe), es)
    if es in (ElementSet.CYL, ElementSet.CYLHZ):
        v = st.values.copy()
        if abs(v[2]) < 1e-9 * RE_EARTH:
            v[2] = 0.0  # test cases start at the ascending node
        st = st.replace(v)
    return st


def case_model(case: TestCase | int) -> ForceModel:
    if not isinstance(case, TestCase):
        case = test_case(case)
    return ForceModel.from_case(case)


# -- iteration -----------------------------------------------------------------------


@dataclass
class MappingRun:
    """States after each application of a map (scaled units).

    ``states[i]`` and ``epochs[i]`` describe revolution ``i``; index 0 is
    the initial state.  ``first_exit`` is the first revolution whose
    displacement leaves the accuracy domain.
    """

    tmap: TransferMap
    states: np.ndarray
    epochs: np.ndarray
    in_domain: np.ndarray
    first_exit: int | None
    exit_element: str | None

    @property
    def n(self) -> int:
        return len(self.epochs) - 1

    def element_state(self, i: int) -> ElementState:
        return self.tmap.element_state(self.states[i], self.epochs[i])

    def physical_states(self) -> np.ndarray:
        return np.array([self.tmap.to_physical(x) for x in self.states])

    @property
    def epochs_s(self) -> np.ndarray:
        return self.epochs * self.tmap.scaling.time


def iterate(tmap: TransferMap, n: int, x0=None, safety: bool = True,
            stop_on_exit: bool = False) -> MappingRun:
    """Apply ``tmap`` ``n`` times starting from ``x0`` (default: the map's own X0).

    With ``safety`` the run aborts with :class:`DomainAbortError` once a
    displacement exceeds ``SAFETY_FACTOR`` times the safety radii.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.array(tmap.x0 if x0 is None else x0, dtype=float)
    dim = tmap.dim
    states = np.empty((n + 1, dim))
    epochs = np.empty(n + 1)
    flags = np.empty(n + 1, dtype=bool)
    radii = tmap.domain.radii
    hard = SAFETY_FACTOR * tmap.safety.radii
    names = tmap.variable_names
    states[0] = x
    epochs[0] = 0.0
    first_exit = None
    exit_element = None
    t = comp = 0.0
    last = n
    fast = tmap.element_set.fast_index if tmap.kind == "stroboscopic" else None
    s0 = x[fast] if fast is not None else 0.0
    for i in range(n + 1):
        if i > 0:
            x, dt = tmap.step(x)
            if fast is not None:
                # repeated += 2*pi drifts by ~1e-8 rad over 1e4 steps
                x[fast] = s0 + TWO_PI * i
            # compensated sum of the flight times
            y = dt - comp
            tn = t + y
            comp = (tn - t) - y
            t = tn
            states[i] = x
            epochs[i] = t
        d = np.abs(tmap.displacement(x))
        inside = bool(np.all(d <= radii))
        flags[i] = inside
        if not inside and first_exit is None:
            first_exit = i
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.nan_to_num(d / radii)
            exit_element = names[int(np.argmax(ratio))]
            if stop_on_exit:
                last = i
                break
        if safety:
            over = d > hard
            if np.any(over):
                j = int(np.argmax(np.where(over, d / hard, 0.0)))
                raise DomainAbortError(
                    f"revolution {i}: displacement of {names[j]} = {d[j]:.3e} exceeds the "
                    f"safety radius {hard[j]:.3e} (scaled)", revolution=i, variable=names[j])
    return MappingRun(tmap, states[:last + 1], epochs[:last + 1], flags[:last + 1],
                      first_exit, exit_element)


# -- numerical references ---------------------------------------------------------------


def _positions(es: ElementSet, states_phys, mu, frame=None) -> np.ndarray:
    out = np.empty((len(states_phys), 3))
    for i, v in enumerate(states_phys):
        out[i] = to_cartesian(ElementState(es, v, 0.0, frame), mu)[0]
    return out


def reference_with_time(tmap: TransferMap, epochs, x0=None,
                        config: IntegratorConfig | None = None) -> tuple[np.ndarray, StepStats]:
    """Cartesian positions (km) from MEE propagation in time to each epoch (scaled).

    The Gauss form is used for every force model so that one (compiled)
    right-hand side serves all zonal cases.
    """
    x0 = tmap.x0 if x0 is None else x0
    start = tmap.element_state(x0)
    mu = tmap.model.zonal.mu
    mee = convert(start, ElementSet.MEE, mu)
    model = tmap.model
    y0 = scale_values(ElementSet.MEE, mee.values, model.scaling)
    system = OdeSystem(ElementSet.MEE, model, "time", Formulation.GAUSS)
    epochs = np.asarray(epochs, dtype=float)
    pts = list(epochs[1:])
    states = [list(y0)]
    stats = StepStats()
    if pts:
        more, stats = integrate_points(system, list(y0), float(epochs[0]), pts, config)
        states.extend(more)
    phys = [unscale_values(ElementSet.MEE, s, model.scaling) for s in states]
    return _positions(ElementSet.MEE, phys, mu), stats


def reference_elements_only(tmap: TransferMap, n: int, x0=None,
                            config: IntegratorConfig | None = None) -> np.ndarray:
    """Reference states (scaled) after each revolution in the map's own set."""
    es = tmap.element_set
    x0 = np.array(tmap.x0 if x0 is None else x0, dtype=float)
    out = np.empty((n + 1, es.dim))
    out[0] = x0
    if n == 0:
        return out
    if tmap.kind == "stroboscopic":
        system = OdeSystem(es, tmap.model, "fast", tmap.formulation, tmap.frame)
        fast = es.fast_index
        s0 = float(x0[fast])
        pts = [s0 + TWO_PI * k for k in range(1, n + 1)]
        ys, _ = integrate_points(system, system.pack(x0, 0.0), s0, pts, config)
        for k, (s, y) in enumerate(zip(pts, ys), start=1):
            out[k] = system.unpack(s, y)[0]
        return out
    system = OdeSystem(es, tmap.model, "time")
    y = list(x0)
    t = 0.0
    h = None
    period = tmap.period
    for k in range(1, n + 1):
        ev = integrate_to_event(system, y, t, 2, +1, s_max=t + 2.0 * period, config=config,
                                h=h if h else period / 64.0)
        t, y, h = ev.s, ev.y, ev.h_next
        out[k] = y
    return out


@dataclass
class ErrorSeries:
    """Position errors (km) per revolution."""

    revs: np.ndarray
    with_time: np.ndarray | None = None
    elements_only: np.ndarray | None = None
    reference_stats: StepStats = field(default_factory=StepStats)


def position_error(run: MappingRun, modes=("with_time", "elements_only"),
                   config: IntegratorConfig | None = None) -> ErrorSeries:
    tm = run.tmap
    es = tm.element_set
    mu = tm.model.zonal.mu
    mapped_phys = run.physical_states()
    mapped_pos = _positions(es, mapped_phys, mu, tm.frame)
    out = ErrorSeries(np.arange(run.n + 1))
    x0 = run.states[0]
    if "with_time" in modes:
        ref, stats = reference_with_time(tm, run.epochs, x0, config)
        out.with_time = np.linalg.norm(mapped_pos - ref, axis=1)
        out.reference_stats = stats
    if "elements_only" in modes:
        ref_states = reference_elements_only(tm, run.n, x0, config)
        ref_phys = [tm.to_physical(x) for x in ref_states]
        ref_pos = _positions(es, ref_phys, mu, tm.frame)
        out.elements_only = np.linalg.norm(mapped_pos - ref_pos, axis=1)
    return out


# -- batch operations ---------------------------------------------------------------------


def build_case_map(case: TestCase | int, element_set, order: int = DEFAULT_ORDER,
                   centers: dict | None = None, eps: float = DEFAULT_EPS,
                   coe_override: dict | None = None, safety_eps: float = SAFETY_EPS,
                   model: ForceModel | None = None) -> TransferMap:
    st = initial_state(case, element_set, coe_override)
    return build_from_state(st, model or case_model(case), order, centers, eps, safety_eps)


@dataclass
class ExitRow:
    element_set: ElementSet
    mappings: int | None
    element: str | None


def domain_exit_table(case: TestCase | int = 1, element_sets=ALL_SETS,
                      eps: float = DEFAULT_EPS, n_max: int = 10000,
                      order: int = DEFAULT_ORDER) -> list[ExitRow]:
    """First revolution at which each set's state leaves its accuracy domain."""
    rows = []
    for es in element_sets:
        tm = build_case_map(case, es, order, eps=eps)
        run = iterate(tm, n_max, safety=False, stop_on_exit=True)
        rows.append(ExitRow(ElementSet.parse(es), run.first_exit, run.exit_element))
    return rows


@dataclass
class TimingResult:
    element_set: ElementSet
    n: int
    build_ms: float
    mapping_ms: float
    numeric_ms: float

    @property
    def ratio(self) -> float:
        return self.numeric_ms / (self.build_ms + self.mapping_ms)


def timing_comparison(case: TestCase | int = 1, element_set=ElementSet.ECCHILL,
                      n: int = 10000, repeats: int = 3, order: int = DEFAULT_ORDER
                      ) -> TimingResult:
    """Median wall-clock of map build, map iteration and MEE numeric propagation."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    st = initial_state(case, element_set)
    model = case_model(case)
    build_from_state(st, model, order)  # warm-up
    b, m, q = [], [], []
    tm = run = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        tm = build_from_state(st, model, order)
        t1 = time.perf_counter()
        run = iterate(tm, n, safety=False)
        t2 = time.perf_counter()
        b.append(t1 - t0)
        m.append(t2 - t1)
    for _ in range(repeats):
        t0 = time.perf_counter()
        reference_with_time(tm, run.epochs)
        q.append(time.perf_counter() - t0)
    med = statistics.median
    return TimingResult(ElementSet.parse(element_set), n, 1e3 * med(b), 1e3 * med(m),
                        1e3 * med(q))
