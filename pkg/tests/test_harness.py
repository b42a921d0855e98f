"""Map iteration, error series, domain exits and timing."""
import numpy as np
import pytest

from hotm.elements import TWO_PI, ElementSet
from hotm.errors import DomainAbortError
from hotm.forces import ForceModel, ZonalField
from hotm.harness import (
    build_case_map,
    domain_exit_table,
    initial_state,
    iterate,
    position_error,
    reference_elements_only,
    timing_comparison,
)
from hotm.integrator import IntegratorConfig
from hotm.maps import build_from_state

KEPLER_KM = ForceModel(ZonalField(j=(0.0,)))


@pytest.fixture(scope="module")
def kepler_ecchill():
    return build_from_state(initial_state(1, ElementSet.ECCHILL), KEPLER_KM,
                            config=IntegratorConfig(da_error="full"))


@pytest.fixture(scope="module")
def ecchill1():
    return build_case_map(1, ElementSet.ECCHILL)


def test_zero_revolutions(ecchill1):
    run = iterate(ecchill1, 0)
    assert run.n == 0
    assert np.array_equal(run.states[0], ecchill1.x0)
    assert run.epochs[0] == 0.0
    assert run.in_domain[0]


def test_negative_count_rejected(ecchill1):
    with pytest.raises(ValueError):
        iterate(ecchill1, -1)


def test_kepler_map_is_stationary(kepler_ecchill):
    tm = kepler_ecchill
    run = iterate(tm, 1000)
    fast = tm.element_set.fast_index
    slow = [j for j in range(tm.dim) if j != fast]
    assert np.max(np.abs(run.states[:, slow] - tm.x0[slow])) <= 1e-12
    assert run.states[-1, fast] == tm.x0[fast] + 1000 * TWO_PI
    assert run.epochs[-1] == pytest.approx(1000 * tm.period, rel=1e-12)
    assert run.first_exit is None


def test_kepler_elements_only_error_vanishes(kepler_ecchill):
    err = position_error(iterate(kepler_ecchill, 20), modes=("elements_only",))
    assert err.with_time is None
    assert np.max(err.elements_only) < 1e-8


def test_record_count_and_monotone_time(ecchill1):
    run = iterate(ecchill1, 50)
    assert len(run.states) == len(run.epochs) == len(run.in_domain) == 51
    assert np.all(np.diff(run.epochs) > 0.0)
    np.testing.assert_allclose(run.epochs_s, run.epochs * ecchill1.scaling.time)


def test_deterministic(ecchill1):
    a, b = iterate(ecchill1, 200), iterate(ecchill1, 200)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.epochs, b.epochs)


def test_ecchill_stays_in_domain_longer_than_coe(ecchill1):
    ecc = iterate(ecchill1, 10000)
    coe = iterate(build_case_map(1, ElementSet.COE), 200, safety=False)
    assert ecc.n == 10000
    assert coe.first_exit is not None
    assert ecc.first_exit is None or ecc.first_exit > coe.first_exit


def test_safety_radius_aborts(ecchill1):
    x = ecchill1.x0.copy()
    j = ecchill1.dvars[0]
    x[j] += 100.0 * ecchill1.safety.radii[0]
    with pytest.raises(DomainAbortError) as err:
        iterate(ecchill1, 5, x0=x)
    assert err.value.revolution == 0
    run = iterate(ecchill1, 1, x0=x, safety=False)
    assert not run.in_domain[0]


def test_error_inside_domain_below_one_km(ecchill1):
    run = iterate(ecchill1, 100)
    err = position_error(run)
    inside = run.in_domain
    assert np.all(np.isfinite(err.with_time)) and np.all(err.with_time >= 0.0)
    assert np.max(err.with_time[inside]) < 1.0
    assert err.with_time[0] < 1e-9 and err.elements_only[0] == 0.0
    assert np.max(err.elements_only) < 1e-5


def test_reference_elements_only_zero(ecchill1):
    ref = reference_elements_only(ecchill1, 0)
    assert np.array_equal(ref[0], ecchill1.x0)


def test_poincare_reference_on_section():
    tm = build_case_map(1, ElementSet.CYLHZ)
    ref = reference_elements_only(tm, 3)
    assert np.max(np.abs(ref[1:, 2])) <= 1e-12
    run = iterate(tm, 3)
    err = position_error(run, modes=("elements_only",))
    assert np.max(err.elements_only) < 1e-5


def test_exit_table_ordering():
    rows = domain_exit_table(1, (ElementSet.COE, ElementSet.ECCHILL), n_max=1000)
    coe, ecc = rows
    assert coe.element_set is ElementSet.COE and coe.element == "argp"
    assert ecc.element == "fhat"
    assert coe.mappings < ecc.mappings


def test_timing_structure():
    res = timing_comparison(1, ElementSet.ECCHILL, n=0, repeats=1)
    assert res.n == 0
    assert res.build_ms > 0.0 and res.numeric_ms >= 0.0
    assert res.mapping_ms < 0.1 * res.build_ms
    with pytest.raises(ValueError):
        timing_comparison(1, ElementSet.ECCHILL, n=0, repeats=0)
