"""Fixed points of eccentric-Hill maps and invariant-curve sweeps."""
import math

import numpy as np
import pytest

from hotm.constants import MU_EARTH
from hotm.da import DaContext, make_variable
from hotm.elements import ElementSet, ElementState, to_cartesian
from hotm.errors import ConfigError
from hotm.forces import DragConfig, ForceModel, ZonalField
from hotm.harness import build_case_map, case_model, initial_state
from hotm.integrator import IntegratorConfig
from hotm.fixed_point import (
    FixedPointProblem,
    find_fixed_point,
    fixed_point_map,
    node_energy,
    section_invariants,
    section_r_vr,
    solve_h,
    sweep_invariant_curves,
    sweep_with_drag,
)
from hotm.maps import build_from_state

MODEL9 = case_model(9)


@pytest.fixture(scope="module")
def fp9():
    tm = build_case_map(9, ElementSet.ECCHILL)
    return tm, find_fixed_point(FixedPointProblem.from_map(tm))


@pytest.fixture(scope="module")
def fp_map(fp9):
    return fixed_point_map(fp9[1], MODEL9)


# -- energy at the node ------------------------------------------------------------------


def cartesian_energy(model, st):
    rv, vv = to_cartesian(st)
    r = np.linalg.norm(rv)
    return 0.5 * vv @ vv - model.zonal.mu / r + model.potential(r, rv[2] / r)


def test_node_energy_matches_cartesian():
    rng = np.random.default_rng(0)
    for _ in range(20):
        H = math.sqrt(MU_EARTH * rng.uniform(6800, 9000))
        vals = [H, H * rng.uniform(-0.9, 0.9), *rng.uniform(-0.05, 0.05, 2), 0.3,
                rng.uniform(0, 2 * math.pi)]
        st = ElementState(ElementSet.ECCHILL, vals)
        got = node_energy(MODEL9, vals[0], vals[1], vals[2], vals[3], vals[5])
        assert got == pytest.approx(cartesian_energy(MODEL9, st), rel=1e-13)


def test_node_energy_on_polynomials():
    ctx = DaContext(2, 1)
    H, Hz, f, g = 52000.0, 30000.0, 0.001, 0.002
    p = node_energy(MODEL9, make_variable(ctx, 0, H), Hz, f, g, 0.4)
    assert p.cons == pytest.approx(node_energy(MODEL9, H, Hz, f, g, 0.4), rel=1e-15)
    h = 1e-2
    fd = (node_energy(MODEL9, H + h, Hz, f, g, 0.4) - node_energy(MODEL9, H - h, Hz, f, g, 0.4))
    assert p.linear()[0] == pytest.approx(fd / (2 * h), rel=1e-7)


def test_kepler_node_energy():
    kep = ForceModel(ZonalField(j=(0.0,)))
    a, e = 7000.0, 0.1
    H = math.sqrt(MU_EARTH * a * (1 - e * e))
    assert node_energy(kep, H, 0.5 * H, e, 0.0) == pytest.approx(-MU_EARTH / (2 * a), rel=1e-14)


def test_solve_h_round_trip():
    H, Hz, f, g = 52500.0, 20000.0, 0.003, -0.001
    E = node_energy(MODEL9, H, Hz, f, g, 0.7)
    assert solve_h(MODEL9, E, Hz, f, g, 0.7) == pytest.approx(H, rel=1e-14)


def test_solve_h_rejects_unbound():
    with pytest.raises(ConfigError):
        solve_h(MODEL9, 1.0, 20000.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        solve_h(MODEL9, -30.0, 20000.0, 0.8, 0.7)


# -- fixed points ----------------------------------------------------------------------


def test_problem_needs_ecchill_map():
    with pytest.raises(ConfigError):
        FixedPointProblem(build_case_map(1, ElementSet.MEE), -29.0, 50000.0)


def test_kepler_map_fixed_everywhere():
    kep = ForceModel(ZonalField(j=(0.0,)))
    tm = build_from_state(initial_state(1, ElementSet.ECCHILL), kep,
                          config=IntegratorConfig(da_error="full"))
    pb = FixedPointProblem.from_map(tm)
    guess = (tm.x0[2] + 1e-3, tm.x0[3] - 2e-3)
    fp = find_fixed_point(pb, guess)
    assert fp.iterations == 1
    assert (fp.fhat, fp.ghat) == guess


def test_case9_fixed_point(fp9):
    _, fp = fp9
    assert fp.fhat == pytest.approx(4.8222e-4, abs=5e-8)
    assert fp.ghat == pytest.approx(1.0805e-3, abs=5e-8)
    assert fp.eccentricity == pytest.approx(0.001183, abs=5e-7)
    assert fp.argp_deg == pytest.approx(65.9489, abs=5e-3)
    assert fp.iterations <= 6
    assert fp.residual <= 1e-12


def test_case9_invariants_preserved(fp9):
    tm, fp = fp9
    x = tm.element_state(FixedPointProblem.from_map(tm).state(fp.fhat, fp.ghat))
    assert node_energy(MODEL9, x["H"], x["Hz"], x["fhat"], x["ghat"], x["u"]) == \
        pytest.approx(fp.energy, rel=1e-14)
    assert x["Hz"] == pytest.approx(fp.hz, rel=1e-14)


def test_reduced_jacobian_matches_finite_differences(fp9):
    tm, fp = fp9
    pb = FixedPointProblem.from_map(tm)
    z = np.array([fp.fhat, fp.ghat]) + 1e-5
    jac = pb.jacobian(*z)
    h = 1e-7
    fd = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd[:, j] = (pb.residual(*(z + e)) - pb.residual(*(z - e))) / (2 * h)
    np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-9)


# -- sweeps ------------------------------------------------------------------------------


def test_zero_offset_collapses(fp9, fp_map):
    cloud = sweep_invariant_curves(fp_map, fp9[1], [0.0], 100)
    assert np.ptp(cloud[0].r_km) < 1e-9
    assert np.ptp(cloud[0].vr_kms) < 1e-12


def test_conservative_sweep_invariants(fp9, fp_map):
    cloud = sweep_invariant_curves(fp_map, fp9[1], [0.01, 0.02], 300)
    assert len(cloud) == 2
    for c in cloud:
        E, hz = section_invariants(fp_map, c.run.states)
        assert np.max(np.abs(E / E[0] - 1.0)) <= 1e-9
        assert np.max(np.abs(hz / hz[0] - 1.0)) <= 1e-9
        assert np.all(np.isfinite(c.r_km)) and np.all(np.isfinite(c.vr_kms))
        assert np.all(np.diff(c.epoch_s) > 0.0)


def test_offset_changes_eccentricity(fp9, fp_map):
    c = sweep_invariant_curves(fp_map, fp9[1], [0.01], 0)[0]
    x = c.run.states[0]
    assert math.hypot(x[2], x[3]) == pytest.approx(fp9[1].eccentricity + 0.01, rel=1e-9)
    r, vr = section_r_vr(fp_map, c.run.states)
    assert np.array_equal(r, c.r_km) and np.array_equal(vr, c.vr_kms)


def test_bad_offset_rejected(fp9, fp_map):
    with pytest.raises(ConfigError):
        sweep_invariant_curves(fp_map, fp9[1], [-0.5], 10)


def test_section_csv(fp9, fp_map):
    cloud = sweep_invariant_curves(fp_map, fp9[1], [0.0, 0.01], 3)
    lines = cloud.to_csv().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "curve_label,rev,r_km,vr_kms,epoch_s"
    assert len(lines) == 2 + 2 * 4
    label, rev, r, vr, t = lines[-1].split(",")
    assert label == "de=0.01" and rev == "3"
    assert float(r) == pytest.approx(cloud[1].r_km[-1], abs=1e-9)


def test_drag_free_limit_matches_conservative(fp9, fp_map):
    tm, cloud = sweep_with_drag(fp9[1], MODEL9, [0.01], 50, drag=DragConfig(cd=0.0))
    ref = sweep_invariant_curves(fp_map, fp9[1], [0.01], 50)
    assert not tm.model.has_drag
    np.testing.assert_allclose(cloud[0].r_km, ref[0].r_km, rtol=0, atol=1e-9)


def test_drag_lowers_radius(fp9):
    tm, cloud = sweep_with_drag(fp9[1], MODEL9, [0.003], 300)
    wm = cloud[0].windowed_mean_r(100)
    assert len(wm) == 3
    assert wm[-1] < wm[0]
