"""Acceptance criteria A1-A9; each test prints one PASS/FAIL line."""
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from conftest import record
from hotm.constants import test_case
from hotm.dynamics import Formulation, OdeSystem
from hotm.elements import (
    TWO_PI,
    ElementSet,
    ElementState,
    convert,
    scale_values,
    to_cartesian,
    unscale_values,
)
from hotm.fixed_point import (
    FixedPointProblem,
    find_fixed_point,
    fixed_point_map,
    section_invariants,
    sweep_invariant_curves,
    sweep_with_drag,
)
from hotm.forces import ForceModel
from hotm.harness import (
    ALL_SETS,
    build_case_map,
    case_model,
    domain_exit_table,
    iterate,
    position_error,
    timing_comparison,
)
from hotm.integrator import integrate, integrate_points

TESTS = Path(__file__).parent


def test_a1_da_algebra():
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                          str(TESTS / "test_da.py")], capture_output=True, text=True)
    summary = res.stdout.strip().splitlines()[-1]
    ok = res.returncode == 0
    record("A1", ok, f"DA algebra suite: {summary}")
    assert ok, res.stdout[-3000:]


def test_a2_cross_formulation():
    case = test_case(1)
    model = ForceModel.from_case(case)
    m = model.scaled()
    sc = m.scaling
    base = ElementState(ElementSet.COE, case.coe_radians())
    T = TWO_PI * (case.a / sc.length) ** 1.5
    pos, hz_err = {}, 0.0
    hz0 = np.cross(*to_cartesian(base))[2]
    for es in ALL_SETS:
        st = convert(base, es)
        system = OdeSystem(es, m, frame=st.frame)
        y = integrate(system, list(scale_values(es, st.values, sc)), 0.0, T).y
        end = ElementState(es, unscale_values(es, np.array(y), sc), 0.0, st.frame)
        rv, vv = to_cartesian(end)
        pos[es] = rv
        hz_err = max(hz_err, abs(np.cross(rv, vv)[2] / hz0 - 1.0))
    ref = pos[ElementSet.MEE]
    spread = max(np.linalg.norm(p - ref) for p in pos.values())

    hill = convert(base, ElementSet.HILL)
    system = OdeSystem(ElementSet.HILL, m, formulation=Formulation.AUTO)
    x0 = list(scale_values(ElementSet.HILL, hill.values, sc))
    ys, _ = integrate_points(system, x0, 0.0, [T * k for k in range(1, 101)])
    energies = []
    for y in [x0] + ys:
        rv, vv = to_cartesian(ElementState(ElementSet.HILL,
                                           unscale_values(ElementSet.HILL, np.array(y), sc)))
        r = np.linalg.norm(rv)
        energies.append(0.5 * vv @ vv - model.zonal.mu / r + model.potential(r, rv[2] / r))
    e_err = float(np.max(np.abs(np.array(energies) / energies[0] - 1.0)))

    ok = spread <= 1e-7 and hz_err <= 1e-12 and e_err <= 1e-11
    record("A2", ok, f"7-set position spread {spread:.2e} km (<=1e-7), Hz drift {hz_err:.2e} "
                     f"(<=1e-12), energy drift over 100 revs {e_err:.2e} (<=1e-11, "
                     f"{system.formulation.value})")
    assert ok


def _numeric_step(tm, x):
    es = tm.element_set
    system = OdeSystem(es, tm.model, "fast", tm.formulation, tm.frame)
    s0 = float(x[es.fast_index])
    y = integrate(system, system.pack(x, 0.0), s0, s0 + TWO_PI).y
    full, t = system.unpack(s0 + TWO_PI, y)
    return np.array(full), t


def test_a3_map_fidelity():
    tm = build_case_map(1, ElementSet.ECCHILL)
    rng = np.random.default_rng(2024)
    r = np.where(np.isinf(tm.domain.radii), 0.0, tm.domain.radii)
    dv = list(tm.dvars)
    worst = 0.0
    for _ in range(100):
        x = tm.x0.copy()
        x[dv] += rng.uniform(-1, 1, len(dv)) * r
        mapped, dt = tm.step(x)
        truth, t = _numeric_step(tm, x)
        worst = max(worst, float(np.max(np.abs(mapped - truth))), abs(dt - t))

    h = 1e-7
    lin = np.array([tm.state[i].linear() for i in dv])
    fd = np.empty_like(lin)
    for col, j in enumerate(dv):
        xp, xm = tm.x0.copy(), tm.x0.copy()
        xp[j] += h
        xm[j] -= h
        fd[:, col] = (_numeric_step(tm, xp)[0][dv] - _numeric_step(tm, xm)[0][dv]) / (2 * h)
    big = np.abs(lin) > 1e-4
    rel = float(np.max(np.abs(lin[big] - fd[big]) / np.abs(fd[big])))
    small = float(np.max(np.abs(lin[~big] - fd[~big]), initial=0.0))
    ok = worst <= 10 * tm.eps and rel <= 1e-5 and small <= 1e-5
    record("A3", ok, f"max map-vs-numeric error {worst:.2e} (<= {10 * tm.eps:.0e} scaled); "
                     f"monodromy rel. error {rel:.2e} (<=1e-5)")
    assert ok


def test_a4_element_only_errors():
    err1 = position_error(iterate(build_case_map(1, ElementSet.ECCHILL), 10000),
                          modes=("elements_only",)).elements_only.max()
    # the HEO run leaves the hard safety radius long before 10000 revolutions
    err6 = position_error(iterate(build_case_map(6, ElementSet.ECCHILL), 10000, safety=False),
                          modes=("elements_only",)).elements_only.max()
    ok = err1 < 1e-5 and err6 < 3e-5
    record("A4", ok, f"case 1 max {err1:.3e} km (<1e-5); case 6 max {err6:.3e} km (<3e-5)")
    assert ok


def test_a5_domain_exit_table():
    rows = domain_exit_table(1, ALL_SETS, n_max=2000)
    want = {ElementSet.COE: "argp", ElementSet.IDEAL: "l2", ElementSet.MEE: "k",
            ElementSet.CYL: "phidot", ElementSet.CYLHZ: "rho", ElementSet.HILL: "r",
            ElementSet.ECCHILL: "fhat"}
    counts = {r.element_set: r.mappings for r in rows}
    ids_ok = all(r.element == want[r.element_set] for r in rows)
    finite = all(c is not None for c in counts.values())
    order_ok = finite and counts[ElementSet.COE] == min(counts.values()) and \
        counts[ElementSet.ECCHILL] == max(counts.values()) and \
        sum(c == counts[ElementSet.ECCHILL] for c in counts.values()) == 1
    ok = ids_ok and order_ok
    table = ", ".join(f"{r.element_set.value} {r.element}@{r.mappings}" for r in rows)
    record("A5", ok, f"exits: {table}")
    assert ok


def test_a6_fixed_point_and_sweep():
    model = case_model(9)
    tm = build_case_map(9, ElementSet.ECCHILL)
    fp = find_fixed_point(FixedPointProblem.from_map(tm))
    fp_ok = abs(fp.fhat - 4.8222e-4) <= 2e-6 and abs(fp.ghat - 1.0805e-3) <= 2e-6 \
        and fp.iterations <= 6
    ftm = fixed_point_map(fp, model)
    cloud = sweep_invariant_curves(ftm, fp, [0.0, 0.01, 0.02, 0.03, 0.04], 2000)
    drift = err = 0.0
    for c in cloud:
        E, hz = section_invariants(ftm, c.run.states)
        drift = max(drift, float(np.max(np.abs(E / E[0] - 1.0))),
                    float(np.max(np.abs(hz / hz[0] - 1.0))))
        err = max(err, float(position_error(c.run, modes=("elements_only",)).elements_only.max()))
    ok = fp_ok and drift <= 1e-9 and err <= 1e-3
    record("A6", ok, f"fhat {fp.fhat:.6e} ghat {fp.ghat:.6e} in {fp.iterations} iterations; "
                     f"sweep E/Hz drift {drift:.1e} (<=1e-9), element error {err:.1e} km "
                     f"(<=1e-3)")
    assert ok


def test_a7_expansion_point():
    n = 10000
    default = position_error(iterate(build_case_map(1, ElementSet.ECCHILL), n),
                             modes=("with_time",)).with_time
    zero = position_error(iterate(build_case_map(1, ElementSet.ECCHILL,
                                                 centers={"fhat": 0.0, "ghat": 0.0}), n),
                          modes=("with_time",)).with_time
    ratio = default[-1] / zero[-1]
    ok = ratio >= 3.0
    record("A7", ok, f"error at n={n}: default {default[-1]:.3e} km, centred {zero[-1]:.3e} km, "
                     f"ratio {ratio:.0f} (>=3)")
    assert ok


def test_a8_performance_ratio():
    res = timing_comparison(1, ElementSet.ECCHILL, n=10000, repeats=3)
    ok = res.ratio >= 5.0
    record("A8", ok, f"build {res.build_ms:.0f} ms + mapping {res.mapping_ms:.0f} ms vs numeric "
                     f"{res.numeric_ms:.0f} ms: ratio {res.ratio:.2f} (>=5)")
    assert ok


def test_a9_drag():
    run = iterate(build_case_map(8, ElementSet.ECCHILL, coe_override={"e": 0.001}), 1000)
    err = position_error(run, modes=("with_time",)).with_time
    over = np.nonzero(err >= 1.0)[0]
    below = int(over[0]) if len(over) else run.n + 1
    tm9 = build_case_map(9, ElementSet.ECCHILL)
    fp = find_fixed_point(FixedPointProblem.from_map(tm9))
    _, cloud = sweep_with_drag(fp, case_model(9), [0.0, 0.003, 0.006, 0.009], 2000)
    mono = {c.label: bool(np.all(np.diff(c.windowed_mean_r(100)) < 0.0)) for c in cloud}
    decay = {c.label: float(c.windowed_mean_r(100)[0] - c.windowed_mean_r(100)[-1])
             for c in cloud}
    ok = below >= 400 and all(mono.values())
    detail = ", ".join(f"{k} {'monotone' if v else 'not monotone'} "
                       f"(decay {decay[k]:.3f} km)" for k, v in mono.items())
    record("A9", ok, f"case 8 error < 1 km for {below - 1} revolutions (>=400); "
                     f"windowed mean r: {detail}")
    assert ok
