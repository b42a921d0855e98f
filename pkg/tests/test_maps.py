"""Stroboscopic and Poincaré transfer maps."""
import functools
import math

import numpy as np
import pytest

from hotm.da import UNBOUNDED, PolynomialMap
from hotm.dynamics import OdeSystem
from hotm.elements import TWO_PI, ElementSet, scale_values, unscale_values
from hotm.errors import ConfigError
from hotm.forces import ForceModel, ZonalField
from hotm.harness import build_case_map, case_model, initial_state
from hotm.integrator import IntegratorConfig, integrate
from hotm.maps import (
    TransferMap,
    accuracy_domain,
    build_from_state,
    nodal_period,
)

KEPLER_KM = ForceModel(ZonalField(j=(0.0,)))
A1 = 6878.1363 / 6378.1363


@pytest.fixture(scope="module")
def ecchill1():
    return build_case_map(1, ElementSet.ECCHILL)


@pytest.fixture(scope="module")
def cylhz1():
    return build_case_map(1, ElementSet.CYLHZ)


def numeric_step(tm, x):
    """One revolution of ``x`` (scaled) by direct propagation in the map's own set."""
    es = tm.element_set
    system = OdeSystem(es, tm.model, "fast", tm.formulation, tm.frame)
    s0 = float(x[es.fast_index])
    y = integrate(system, system.pack(x, 0.0), s0, s0 + TWO_PI).y
    full, t = system.unpack(s0 + TWO_PI, y)
    return np.array(full), t


# -- unperturbed -------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def kepler_map(es):
    # full-coefficient step control: the default only controls constant parts
    return build_from_state(initial_state(1, es), KEPLER_KM,
                            config=IntegratorConfig(da_error="full"))


STROBE_SETS = [ElementSet.COE, ElementSet.MEE, ElementSet.HILL, ElementSet.ECCHILL,
               ElementSet.IDEAL]


@pytest.mark.parametrize("es", STROBE_SETS, ids=lambda s: s.value)
def test_kepler_stroboscopic_identity(es):
    tm = kepler_map(es)
    coef = tm.state.coef[list(tm.dvars)]
    want = PolynomialMap.identity(tm.state.ctx).coef.copy()
    want[:, 0] = tm.centers
    assert np.max(np.abs(coef - want)) <= 1e-12
    assert tm.period == pytest.approx(TWO_PI * A1**1.5, rel=1e-13)


@pytest.mark.parametrize("es", STROBE_SETS, ids=lambda s: s.value)
def test_kepler_map_domain_unbounded(es):
    tm = kepler_map(es)
    assert np.all(accuracy_domain(tm, include_time=False).radii == UNBOUNDED)


def test_kepler_poincare_identity():
    tm = build_from_state(initial_state(1, ElementSet.CYLHZ), KEPLER_KM)
    coef = tm.state.coef[list(tm.dvars)].copy()
    coef[1, 0] -= TWO_PI  # phi advances by one turn
    want = PolynomialMap.identity(tm.state.ctx).coef.copy()
    want[:, 0] = tm.centers
    assert tm.period == pytest.approx(TWO_PI * A1**1.5, rel=1e-12)
    assert np.max(np.abs(coef - want)) <= 1e-12


# -- test case 1 -------------------------------------------------------------------


def test_constant_part_matches_propagation(ecchill1):
    x1, t1 = numeric_step(ecchill1, ecchill1.x0)
    mapped, dt = ecchill1.step(ecchill1.x0)
    assert np.max(np.abs(mapped - x1)) <= 1e-12
    assert abs(dt - t1) <= 1e-12


def test_coe_argp_advances():
    tm = build_case_map(1, ElementSet.COE)
    x1, _ = numeric_step(tm, tm.x0)
    dw = tm.state[4].cons - tm.x0[4]
    assert dw > 0.0
    assert dw == pytest.approx(x1[4] - tm.x0[4], abs=1e-12)


def test_map_vs_truth_inside_domain(ecchill1):
    rng = np.random.default_rng(0)
    r = ecchill1.domain.radii
    r = np.where(np.isinf(r), 0.0, r)
    for _ in range(10):
        x = ecchill1.x0.copy()
        x[list(ecchill1.dvars)] += rng.uniform(-1, 1, len(r)) * r
        mapped, dt = ecchill1.step(x)
        truth, t = numeric_step(ecchill1, x)
        assert np.max(np.abs(mapped - truth)) <= 10 * ecchill1.eps
        assert abs(dt - t) <= 10 * ecchill1.eps


def test_two_revolutions(ecchill1):
    rng = np.random.default_rng(1)
    r = np.where(np.isinf(ecchill1.domain.radii), 0.0, ecchill1.domain.radii)
    x = ecchill1.x0.copy()
    x[list(ecchill1.dvars)] += 0.1 * rng.uniform(-1, 1, len(r)) * r
    m1, _ = ecchill1.step(x)
    m2, _ = ecchill1.step(m1)
    n1, _ = numeric_step(ecchill1, x)
    n2, _ = numeric_step(ecchill1, n1)
    assert np.max(np.abs(m2 - n2)) <= 10 * ecchill1.eps


def test_domain_monotone_in_eps(ecchill1):
    loose = accuracy_domain(ecchill1, 1e-6).radii
    assert np.all(loose >= ecchill1.domain.radii)


def test_scaling_closure(ecchill1):
    phys = unscale_values(ElementSet.ECCHILL, ecchill1.x0, ecchill1.scaling)
    back = scale_values(ElementSet.ECCHILL, phys, ecchill1.scaling)
    np.testing.assert_allclose(back, ecchill1.x0, rtol=1e-15)


def test_serialization_round_trip(ecchill1):
    tm = TransferMap.loads(ecchill1.dumps())
    assert np.array_equal(tm.state.coef, ecchill1.state.coef)
    assert np.array_equal(tm.time.c, ecchill1.time.c)
    assert np.array_equal(tm.domain.radii, ecchill1.domain.radii)
    assert np.array_equal(tm.x0, ecchill1.x0)
    assert tm.model.zonal == ecchill1.model.zonal


def test_loads_rejects_other_text():
    with pytest.raises((ValueError, KeyError, IndexError)):
        TransferMap.loads("# something else\n# begin state\n")


# -- expansion centres ---------------------------------------------------------------


def test_centers_at_x0_reproduce_default(ecchill1):
    st = initial_state(1, ElementSet.ECCHILL)
    tm = build_case_map(1, ElementSet.ECCHILL, centers={"fhat": st["fhat"], "ghat": st["ghat"]})
    np.testing.assert_allclose(tm.state.coef, ecchill1.state.coef, rtol=0, atol=1e-15)


def test_shifted_centers_reproduce_flow():
    tm = build_case_map(1, ElementSet.ECCHILL, centers={"fhat": 0.0, "ghat": 0.0})
    assert np.all(tm.centers[2:4] == 0.0)
    x1, t1 = numeric_step(tm, tm.x0)
    mapped, dt = tm.step(tm.x0)
    assert np.max(np.abs(mapped - x1)) <= 1e-12
    # the flight time is a separate polynomial; held to the map accuracy target
    assert abs(dt - t1) <= 10 * tm.eps


def test_bad_center_rejected():
    with pytest.raises(ConfigError):
        build_case_map(1, ElementSet.ECCHILL, centers={"fhat": 1.0, "ghat": 0.2})
    with pytest.raises(ConfigError):
        build_case_map(1, ElementSet.ECCHILL, centers={"u": 0.0})


# -- Poincaré maps ---------------------------------------------------------------------


def test_poincare_z_identically_zero(cylhz1):
    assert np.max(np.abs(cylhz1.state.coef[2])) <= 1e-12


def test_poincare_constant_part(cylhz1):
    tn, y = nodal_period(ElementSet.CYLHZ, cylhz1.x0, cylhz1.model)
    mapped, dt = cylhz1.step(cylhz1.x0)
    assert dt == pytest.approx(tn, abs=1e-12)
    y = np.array(y)
    y[1] = mapped[1] - math.remainder(mapped[1] - y[1], TWO_PI)
    assert np.max(np.abs(mapped - y)) <= 1e-11


def test_nodal_period_polynomial_vs_event(cylhz1):
    rng = np.random.default_rng(2)
    r = np.where(np.isinf(cylhz1.domain.radii), 0.0, cylhz1.domain.radii)
    for _ in range(3):
        x = cylhz1.x0.copy()
        x[list(cylhz1.dvars)] += 0.5 * rng.uniform(-1, 1, len(r)) * r
        tn, _ = nodal_period(ElementSet.CYLHZ, x, cylhz1.model)
        _, dt = cylhz1.step(x)
        assert abs(dt - tn) * cylhz1.scaling.time <= 1e-8


def test_poincare_needs_section_state():
    st = initial_state(1, ElementSet.CYLHZ)
    x = scale_values(ElementSet.CYLHZ, st.values, case_model(1).scaled().scaling)
    x[2] = 0.01
    from hotm.maps import build_poincare_cyl
    with pytest.raises(ConfigError):
        build_poincare_cyl(ElementSet.CYLHZ, x, case_model(1).scaled())
