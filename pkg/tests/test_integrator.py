"""Embedded RK8(7) integration, events and DA flow expansion."""
import math

import numpy as np
import pytest

from hotm.constants import J2, test_case
from hotm.da import DaContext, make_variable
from hotm.dynamics import OdeSystem
from hotm.elements import TWO_PI, ElementSet, ElementState, convert, scale_values, to_cartesian
from hotm.errors import IntegrationError
from hotm.forces import ForceModel, ZonalField
from hotm.integrator import (
    IntegratorConfig,
    integrate,
    integrate_points,
    integrate_to_event,
    step,
    tableau_residuals,
)

ZJ2 = ForceModel(ZonalField(j=(J2,))).scaled()


def kepler_rhs(s, y):
    x, yy, z, vx, vy, vz = y
    r3 = (x * x + yy * yy + z * z) ** 1.5
    return [vx, vy, vz, -x / r3, -yy / r3, -z / r3]


def test_tableau_order_conditions():
    res = tableau_residuals()
    assert max(res.values()) < 1e-15


def test_exponential():
    r = integrate(lambda s, y: [y[0]], [1.0], 0.0, 1.0)
    assert r.y[0] == pytest.approx(math.e, abs=1e-12)
    assert r.s == 1.0


def test_kepler_period_returns():
    a = 1.4
    y0 = [a, 0.0, 0.0, 0.0, 0.6 / math.sqrt(a), 0.8 / math.sqrt(a)]
    # the default 1e-12 per-step tolerance accumulates to ~2e-8 km here
    r = integrate(kepler_rhs, y0, 0.0, TWO_PI * a**1.5, IntegratorConfig(abs_tol=1e-14))
    assert np.max(np.abs(np.array(r.y[:3]) - y0[:3])) * 6378.1363 < 1e-9


def test_harmonic_oscillator_energy():
    r = integrate(lambda s, y: [y[1], -y[0]], [1.0, 0.0], 0.0, 10 * math.pi)
    assert abs(0.5 * (r.y[0] ** 2 + r.y[1] ** 2) - 0.5) < 1e-11


def test_backward_integration():
    r = integrate(lambda s, y: [y[0]], [math.e], 1.0, 0.0)
    assert r.y[0] == pytest.approx(1.0, abs=1e-12)


def test_step_convergence_order():
    # fixed-step global error scales like h^8
    y0 = [1.0, 0.0, 0.0, 0.0, 0.85, 0.5]
    T = 2.0
    errs = []
    ref = integrate(kepler_rhs, y0, 0.0, T, IntegratorConfig(abs_tol=1e-15)).y
    for n in (8, 16):
        y, h = list(y0), T / n
        for i in range(n):
            y, _ = step(kepler_rhs, i * h, y, h)
        errs.append(np.max(np.abs(np.array(y) - ref)))
    assert math.log2(errs[0] / errs[1]) > 7.0


def test_statistics_recorded():
    r = integrate(kepler_rhs, [1.0, 0, 0, 0, 1.0, 0], 0.0, 5.0)
    assert r.stats.accepted > 0
    assert r.stats.rhs_evals >= 12 * r.stats.accepted


def test_max_steps():
    with pytest.raises(IntegrationError):
        integrate(kepler_rhs, [1.0, 0, 0, 0, 1.0, 0], 0.0, 50.0, IntegratorConfig(max_steps=5))


def test_points_carry_step():
    pts = [0.5, 1.0, 1.5]
    ys, stats = integrate_points(lambda s, y: [y[0]], [1.0], 0.0, pts)
    for p, y in zip(pts, ys):
        assert y[0] == pytest.approx(math.exp(p), rel=1e-12)


# -- events ----------------------------------------------------------------------


def test_equator_crossing_from_apex():
    # circular inclined orbit starting at the northern apex
    rot = np.array([[1, 0, 0], [0, math.cos(0.5), -math.sin(0.5)], [0, math.sin(0.5), math.cos(0.5)]])
    r0 = rot @ np.array([0.0, 1.0, 0.0])
    v0 = rot @ np.array([-1.0, 0.0, 0.0])
    y0 = list(r0) + list(v0)
    ev = integrate_to_event(kepler_rhs, y0, 0.0, 2, -1)
    # apex to descending node: a quarter period
    assert ev.s == pytest.approx(math.pi / 2, abs=1e-11)
    assert abs(ev.y[2]) <= 1e-12


def test_nodal_period_case1():
    st = convert(ElementState(ElementSet.COE, test_case(1).coe_radians()), ElementSet.COE)
    v = st.values.copy()
    v[5] = -v[4]  # start at the ascending node
    rv, vv = to_cartesian(st.replace(v))
    sc = ZJ2.scaling
    y0 = list(np.concatenate([rv / sc.length, vv / sc.velocity]))
    ev = integrate_to_event(OdeSystem(ElementSet.CARTESIAN, ZJ2), y0, 0.0, 2, +1)
    T = TWO_PI * (test_case(1).a / sc.length) ** 1.5
    assert abs(ev.s - T) / T < 5e-3
    assert ev.s != T
    assert abs(ev.y[2]) <= 1e-12


def test_event_not_found():
    with pytest.raises(IntegrationError):
        integrate_to_event(lambda s, y: [1.0], [-10.0], 0.0, 0, +1, s_max=1.0)


# -- DA flow ---------------------------------------------------------------------


def _case1_ecchill():
    st = convert(ElementState(ElementSet.COE, test_case(1).coe_radians()), ElementSet.ECCHILL)
    x = scale_values(ElementSet.ECCHILL, st.values, ZJ2.scaling)
    system = OdeSystem(ElementSet.ECCHILL, ZJ2, "fast")
    return system, system.pack(x, 0.0), float(x[5])


def test_da_constant_part_matches_float():
    system, y0, s0 = _case1_ecchill()
    ctx = DaContext(3, len(y0))
    yd = [make_variable(ctx, i, v) for i, v in enumerate(y0)]
    rd = integrate(system, yd, s0, s0 + TWO_PI)
    rf = integrate(system, y0, s0, s0 + TWO_PI)
    assert np.max(np.abs([p.cons - f for p, f in zip(rd.y, rf.y)])) <= 1e-12


def test_da_linear_part_matches_finite_differences():
    system, y0, s0 = _case1_ecchill()
    ctx = DaContext(2, len(y0))
    yd = [make_variable(ctx, i, v) for i, v in enumerate(y0)]
    rd = integrate(system, yd, s0, s0 + TWO_PI)
    stm = np.array([p.linear() for p in rd.y])
    h = 1e-7
    fd = np.empty_like(stm)
    for j in range(len(y0)):
        yp, ym = list(y0), list(y0)
        yp[j] += h
        ym[j] -= h
        a = np.array(integrate(system, yp, s0, s0 + TWO_PI).y)
        b = np.array(integrate(system, ym, s0, s0 + TWO_PI).y)
        fd[:, j] = (a - b) / (2 * h)
    big = np.abs(stm) > 1e-4
    np.testing.assert_allclose(stm[big], fd[big], rtol=1e-5)
    assert np.max(np.abs(stm[~big] - fd[~big])) < 1e-5
