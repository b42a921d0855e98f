"""Truncated Taylor algebra: construction, arithmetic, intrinsics, maps, domains."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotm.da import (
    UNBOUNDED,
    DaContext,
    PolynomialMap,
    TruncatedPolynomial,
    antiderive,
    compose,
    derive,
    estimate_domain,
    intrinsic,
    invert,
    make_variable,
    multiply,
    partial_invert,
    tail_radius,
)
from hotm.errors import SingularityError

CTX = DaContext(4, 3)


def int_poly(ctx, seed):
    # small integer coefficients make every product exact in floating point
    rng = np.random.default_rng(seed)
    return TruncatedPolynomial(ctx, rng.integers(-4, 5, ctx.size).astype(float))


def rand_poly(ctx, seed, scale=1.0, cons=None):
    rng = np.random.default_rng(seed)
    c = scale * rng.standard_normal(ctx.size)
    if cons is not None:
        c[0] = cons
    return TruncatedPolynomial(ctx, c)


seeds = st.integers(0, 2**31 - 1)


# -- construction ----------------------------------------------------------------


def test_context_is_shared():
    assert DaContext(4, 3) is CTX
    assert CTX.size == math.comb(4 + 3, 3)


@pytest.mark.parametrize("order,nvars", [(0, 2), (3, 0)])
def test_context_rejects_bad_sizes(order, nvars):
    with pytest.raises(ValueError):
        DaContext(order, nvars)


def test_make_variable():
    x = make_variable(DaContext(2, 1), 0, 0.0)
    assert x.terms() == {(1,): 1.0}
    y = make_variable(DaContext(5, 6), 3, 1.5)
    assert y.terms() == {(0,) * 6: 1.5, (0, 0, 0, 1, 0, 0): 1.0}
    assert y.evaluate(np.zeros(6)) == 1.5


def test_make_variable_index_out_of_range():
    with pytest.raises(IndexError):
        make_variable(CTX, 3)


def test_from_terms_rejects_excess_degree():
    with pytest.raises(ValueError):
        TruncatedPolynomial.from_terms(DaContext(2, 1), {(3,): 1.0})


def test_coefficients_are_read_only():
    p = make_variable(CTX, 0, 1.0)
    with pytest.raises(ValueError):
        p.c[0] = 2.0


# -- arithmetic ------------------------------------------------------------------


def test_square_truncation():
    for k, want in [(2, {(0,): 1.0, (1,): 2.0, (2,): 1.0}), (1, {(0,): 1.0, (1,): 2.0})]:
        x = make_variable(DaContext(k, 1), 0, 1.0)
        assert multiply(x, x).terms() == want


def test_context_mismatch():
    with pytest.raises(ValueError):
        multiply(make_variable(DaContext(2, 1), 0), make_variable(DaContext(3, 1), 0))


@settings(max_examples=30, deadline=None)
@given(seeds, seeds, seeds)
def test_ring_axioms(sa, sb, sc):
    a, b, c = (int_poly(CTX, s) for s in (sa, sb, sc))
    assert np.array_equal((a * b).c, (b * a).c)
    assert np.array_equal((a + b).c, (b + a).c)
    assert np.array_equal(((a * b) * c).c, (a * (b * c)).c)
    assert np.array_equal((a * (b + c)).c, (a * b + a * c).c)
    assert np.array_equal((a - a).c, np.zeros(CTX.size))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_product_matches_pointwise(seed):
    ctx = DaContext(5, 2)
    a, b = rand_poly(ctx, seed), rand_poly(ctx, seed + 1)
    rng = np.random.default_rng(seed)
    for h in (1e-2, 1e-3):
        d = h * rng.uniform(-1, 1, 2)
        err = abs((a * b).evaluate(d) - a.evaluate(d) * b.evaluate(d))
        assert err <= 1e3 * h**6 + 1e-14


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_no_term_above_order(seed):
    a = rand_poly(CTX, seed, cons=0.7)
    for p in (a * a, a.exp(), a.sin(), a.sqrt(), a.power(2.5), a.antiderive(1)):
        assert p.c.shape == (CTX.size,)
        assert set(map(sum, p.terms())) <= set(range(CTX.order + 1))


def test_small_coefficients_dropped():
    ctx = DaContext(2, 1)
    a = TruncatedPolynomial(ctx, [1.0, 1e-9, 0.0])
    assert (a * a).coefficient((2,)) == 0.0


# -- intrinsics ------------------------------------------------------------------


def test_sin_maclaurin():
    s = intrinsic("sin", make_variable(DaContext(5, 1), 0))
    np.testing.assert_allclose(s.c, [0, 1, 0, -1 / 6, 0, 1 / 120], atol=1e-16)


def test_sqrt_binomial():
    s = intrinsic("sqrt", make_variable(DaContext(2, 1), 0, 1.0))
    np.testing.assert_allclose(s.c, [1, 0.5, -0.125], atol=1e-16)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_pythagorean_identity(seed):
    a = rand_poly(DaContext(6, 3), seed)
    one = a.sin() * a.sin() + a.cos() * a.cos()
    assert abs(one.c[0] - 1.0) <= 1e-13
    assert np.max(np.abs(one.c[1:])) <= 1e-13


INTRINSIC_CASES = [
    ("sin", (), np.sin, 0.3),
    ("cos", (), np.cos, 0.3),
    ("sqrt", (), np.sqrt, 1.7),
    ("exp", (), np.exp, 0.2),
    ("log", (), np.log, 1.4),
    ("reciprocal", (), lambda v: 1.0 / v, 1.3),
    ("atan", (), np.arctan, 0.4),
    ("power", (3,), lambda v: v**3, 1.1),
    ("power", (-1.5,), lambda v: v**-1.5, 1.2),
    ("atan2", (0.8,), lambda v: np.arctan2(v, 0.8), 0.5),
]


@pytest.mark.parametrize("name,args,f,a0", INTRINSIC_CASES, ids=lambda v: str(v))
def test_intrinsic_truncation_order(name, args, f, a0):
    k = 3
    ctx = DaContext(k, 2)
    a = rand_poly(ctx, 11, scale=0.5, cons=a0)
    fa = intrinsic(name, a, *args)
    u = np.array([0.6, -0.8])
    hs = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    errs = np.array([abs(fa.evaluate(h * u) - f(a.evaluate(h * u))) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= k + 0.5


def test_atan2_polynomial_denominator():
    ctx = DaContext(4, 2)
    y = make_variable(ctx, 0, 0.3)
    x = make_variable(ctx, 1, -0.9)
    t = y.atan2(x)
    d = np.array([1e-3, -2e-3])
    assert abs(t.evaluate(d) - math.atan2(0.3 + d[0], -0.9 + d[1])) < 1e-13


@pytest.mark.parametrize("name,a0", [("sqrt", -1.0), ("log", 0.0), ("reciprocal", 0.0)])
def test_intrinsic_domain_errors(name, a0):
    with pytest.raises((ValueError, ArithmeticError)):
        intrinsic(name, make_variable(CTX, 0, a0))


def test_unknown_intrinsic():
    with pytest.raises(ValueError):
        intrinsic("tanh", make_variable(CTX, 0))


# -- derivation ------------------------------------------------------------------


def test_derive_square():
    x = make_variable(DaContext(3, 1), 0)
    assert derive(x * x, 0).terms() == {(1,): 2.0}


def test_antiderive_of_derive():
    a = int_poly(CTX, 5)
    back = antiderive(derive(a, 1), 1)
    mask = CTX.exponents[:, 1] > 0
    np.testing.assert_allclose(back.c, np.where(mask, a.c, 0.0), atol=1e-14)


def test_derive_var_out_of_range():
    with pytest.raises(IndexError):
        derive(make_variable(CTX, 0), 5)


def test_derive_finite_difference():
    ctx = DaContext(5, 2)
    x, y = make_variable(ctx, 0, 0.4), make_variable(ctx, 1, -0.2)
    f = (x * y).exp() + (x + 2 * y).sin()
    h = 1e-5
    for var in (0, 1):
        e = np.zeros(2)
        e[var] = h
        fd = (f.evaluate(e) - f.evaluate(-e)) / (2 * h)
        assert derive(f, var).cons == pytest.approx(fd, rel=1e-6)


# -- maps ------------------------------------------------------------------------


def rand_map(ctx, seed, scale=0.3, linear=True):
    rng = np.random.default_rng(seed)
    coef = scale * rng.standard_normal((ctx.nvars, ctx.size))
    coef[:, 0] = 0.0
    if linear:
        coef[:, 1:1 + ctx.nvars] = np.eye(ctx.nvars) + 0.2 * rng.standard_normal((ctx.nvars,) * 2)
    return PolynomialMap(ctx, coef)


def test_compose_identities():
    ctx = DaContext(4, 3)
    f = rand_map(ctx, 1)
    ident = PolynomialMap.identity(ctx)
    np.testing.assert_allclose(compose(f, ident).coef, f.coef, atol=1e-15)
    np.testing.assert_allclose(compose(ident, f).coef, f.coef, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_compose_matches_evaluation(seed):
    ctx = DaContext(4, 3)
    f, g = rand_map(ctx, seed), rand_map(ctx, seed + 7)
    fg = compose(f, g)
    rng = np.random.default_rng(seed)
    for h in (1e-2, 1e-3):
        d = h * rng.uniform(-1, 1, 3)
        err = np.max(np.abs(fg.evaluate(d) - f.evaluate(g.evaluate(d))))
        assert err <= 1e4 * h**5 + 1e-14


def test_compose_errors():
    ctx = DaContext(3, 2)
    f = rand_map(ctx, 0)
    with pytest.raises(ValueError):
        compose(f, PolynomialMap.from_polys([make_variable(ctx, 0)]))
    shifted = PolynomialMap.identity(ctx, centers=[0.1, 0.0])
    with pytest.raises(ValueError):
        compose(f, shifted)
    compose(f, shifted, allow_offset=True)


def test_invert_round_trip():
    ctx = DaContext(5, 3)
    f = rand_map(ctx, 3)
    fi = invert(f)
    np.testing.assert_allclose(compose(f, fi).coef, PolynomialMap.identity(ctx).coef,
                               atol=1e-12)


def test_invert_singular():
    ctx = DaContext(3, 2)
    x = make_variable(ctx, 0)
    with pytest.raises(SingularityError):
        invert(PolynomialMap.from_polys([x, x * x]))


def test_partial_invert_identity_equation():
    ctx = DaContext(4, 2)
    x, p = make_variable(ctx, 0), make_variable(ctx, 1)
    sol = partial_invert(PolynomialMap.from_polys([x - p]), [0])
    assert sol[0].terms() == {(0, 1): 1.0}


def test_partial_invert_series_reversion():
    ctx = DaContext(4, 2)
    x, p = make_variable(ctx, 0), make_variable(ctx, 1)
    sol = partial_invert(PolynomialMap.from_polys([x + x * x - p]), [0])
    assert sol[0].terms() == {(0, 1): 1.0, (0, 2): -1.0, (0, 3): 2.0, (0, 4): -5.0}
    # Newton oracle at a sampled parameter
    pv = 0.01
    root = (-1 + math.sqrt(1 + 4 * pv)) / 2
    assert abs(sol[0].evaluate([0.0, pv]) - root) < 2 * 14 * pv**5


def test_partial_invert_linear():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    B = rng.standard_normal((2, 3))
    ctx = DaContext(3, 5)
    coef = np.zeros((2, ctx.size))
    coef[:, 1:3] = A
    coef[:, 3:6] = B
    sol = partial_invert(PolynomialMap(ctx, coef), [0, 1])
    want = -np.linalg.solve(A, B)
    np.testing.assert_allclose(sol.coef[:, 3:6], want, atol=1e-14)
    assert np.max(np.abs(np.delete(sol.coef, [3, 4, 5], axis=1))) <= 1e-14


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_partial_invert_residual(seed):
    ctx = DaContext(5, 4)
    rng = np.random.default_rng(seed)
    coef = 0.2 * rng.standard_normal((2, ctx.size))
    coef[:, 0] = 0.0
    coef[:, 1:3] = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    c = PolynomialMap(ctx, coef)
    sol = partial_invert(c, [0, 1])
    # substitute x(p) back into c
    sub = PolynomialMap.from_polys([sol[0], sol[1], make_variable(ctx, 2), make_variable(ctx, 3)])
    resid = compose(c, sub)
    assert np.max(np.abs(resid.coef)) <= 1e-12


def test_partial_invert_errors():
    ctx = DaContext(3, 2)
    x, p = make_variable(ctx, 0), make_variable(ctx, 1)
    with pytest.raises(SingularityError):
        partial_invert(PolynomialMap.from_polys([x * x - p]), [0])
    with pytest.raises(ValueError):
        partial_invert(PolynomialMap.from_polys([x - p + 1.0]), [0])
    with pytest.raises(ValueError):
        partial_invert(PolynomialMap.from_polys([x - p]), [0, 1])


def test_dump_round_trip():
    f = rand_map(DaContext(3, 3), 8)
    text = f.dump()
    assert text.splitlines()[2].count("|") == 1
    g = PolynomialMap.load(text)
    assert np.array_equal(f.coef, g.coef)


# -- accuracy domain -------------------------------------------------------------


def test_linear_polynomial_is_unbounded():
    ctx = DaContext(4, 2)
    p = 2.0 * make_variable(ctx, 0) - make_variable(ctx, 1) + 3.0
    d = estimate_domain(p, 1e-9)
    assert np.all(d.radii == UNBOUNDED)


def test_geometric_series_radius():
    ctx = DaContext(5, 1)
    p = (1.0 - make_variable(ctx, 0)).reciprocal()
    eps = 1e-9
    r = estimate_domain(p, eps).radii[0]
    assert 0.0 < r < 1.0
    partial = sum(r**j for j in range(6))
    assert abs(1.0 / (1.0 - r) - partial) <= 10 * eps


def test_tail_radius_solves_extrapolated_tail():
    norms = np.array([1.0, 1.0, 0.5, 0.25, 0.125, 0.0625])
    r = tail_radius(norms, 1e-8)
    tail = sum(2.0**(1 - j) * r**j for j in range(6, 400))
    assert tail == pytest.approx(1e-8, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_radius_monotone_in_eps(seed):
    m = rand_map(DaContext(4, 3), seed, linear=False)
    loose = estimate_domain(m, 1e-6).radii
    tight = estimate_domain(m, 1e-9).radii
    assert np.all(loose >= tight)


def test_domain_needs_order_three():
    with pytest.raises(ValueError):
        estimate_domain(make_variable(DaContext(2, 1), 0), 1e-9)
