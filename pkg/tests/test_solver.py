import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nlgreen import (ConvexProfile, DivergenceError, GoodMeasureError, GridFunction, InvalidTestFunctionError,
                     Nonlinearity, NonlinearityError, OrderingError, RadonMeasure, SolverConfig, TruncationEnvelope,
                     comparison_test, convex_kato_check, kato_check, monotone_solve, picard_solve,
                     weak_dual_residual)
from nlgreen.greenop import TestFunction, nudge_off_nodes
from nlgreen.solver import truncate_h
from nlgreen.spaces import l1_weighted
from nlgreen import suites

CFG = SolverConfig(tol=1e-10)
ONE = TestFunction(lambda x: np.ones(np.shape(x)[0]), "one")


def _dirac(op, x, w=1.0):
    return RadonMeasure.dirac(op.spec, nudge_off_nodes(op, np.atleast_1d(np.asarray(x, dtype=float))), w)


# -- truncation ------------------------------------------------------------------

def test_truncate_h(op_small):
    g = Nonlinearity.power(3.0)
    env = TruncationEnvelope.from_measure(op_small, _dirac(op_small, 0.1) - _dirac(op_small, -0.4, 0.5))
    lo, hi = env.lower.values, env.upper.values
    assert np.array_equal(truncate_h(g, hi + 1.0, env).values, g(hi))
    assert np.array_equal(truncate_h(g, lo - 1.0, env).values, g(lo))
    mid = 0.5 * (lo + hi)
    assert np.array_equal(truncate_h(g, mid, env).values, g(mid))
    env_pos = TruncationEnvelope.from_measure(op_small, _dirac(op_small, 0.1))
    assert np.all(truncate_h(g, np.zeros(op_small.n), env_pos).values == 0)


# -- Picard ------------------------------------------------------------------------

def test_zero_datum(op_small):
    u, rep = picard_solve(op_small, Nonlinearity.power(3.0), RadonMeasure.zero(op_small.spec), CFG)
    assert np.all(u.values == 0)
    assert rep.iterations <= 1 and rep.converged


def test_linear_oracle(any_op):
    m = any_op.mesh
    f = np.cos(2 * m.nodes[:, 0]) + 0.3
    u, _ = picard_solve(any_op, Nonlinearity.linear(), RadonMeasure.from_density(GridFunction(m, f)), CFG)
    ud = np.linalg.solve(np.eye(m.n) + any_op.A, any_op.A @ f)
    g = m.spec.gamma
    assert l1_weighted(m, u.values - ud, g) / l1_weighted(m, ud, g) <= 1e-8


def test_cubic_dirac(op_rfl1):
    mu = _dirac(op_rfl1, 0.0)
    u, rep = picard_solve(op_rfl1, Nonlinearity.power(3.0), mu, CFG)
    assert rep.residual < 1e-8
    V = op_rfl1.apply_measure(mu).values
    assert np.all(u.values <= V + 1e-8) and np.all(u.values >= -1e-8)
    assert len(rep.residual_history) == rep.iterations + 1


def test_divergence_and_goodmeasure(op_small):
    mu = _dirac(op_small, 0.2)
    with pytest.raises(DivergenceError) as e:
        picard_solve(op_small, Nonlinearity.power(3.0), mu, SolverConfig(max_iter=1))
    assert len(e.value.history) >= 1
    with pytest.raises(GoodMeasureError):
        picard_solve(op_small, Nonlinearity.power(2.0), mu, CFG, gate=True)      # p* = 5/3
    picard_solve(op_small, Nonlinearity.power(1.5), mu, CFG, gate=True)


@pytest.mark.parametrize("name", ["op_rfl1", "op_sfl1", "op_rfl2", "op_cfl2"])
def test_solver_suite(request, name):
    op = request.getfixturevalue(name)
    checks = suites.solver_suite(op, monotone=op.backend.label == "exact")
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


# -- monotone --------------------------------------------------------------------

def test_monotone_linear_gap(op_rfl1):
    m = op_rfl1.mesh
    mu = RadonMeasure.from_density(GridFunction(m, np.sin(3 * m.x)))
    lo, hi, rep = monotone_solve(op_rfl1, Nonlinearity.linear(), mu, CFG)
    assert rep.sandwich_violation <= 1e-6
    ud = np.linalg.solve(np.eye(m.n) + op_rfl1.A, op_rfl1.A @ np.sin(3 * m.x))
    assert np.max(np.abs(lo.values - ud)) <= 1e-6


def test_monotone_bracket_nonnegative(op_small):
    mu = _dirac(op_small, 0.3)
    env = TruncationEnvelope.from_measure(op_small, mu)
    assert np.all(env.lower.values == 0)
    lo, hi, _ = monotone_solve(op_small, Nonlinearity.power(2.0), mu, CFG)
    u, _ = picard_solve(op_small, Nonlinearity.power(2.0), mu, CFG)
    assert np.all(lo.values <= u.values + 1e-9) and np.all(u.values <= hi.values + 1e-9)


# -- certification -----------------------------------------------------------------

def test_weak_dual_residual(op_rfl1):
    m = op_rfl1.mesh
    g = Nonlinearity.power(3.0)
    mu = _dirac(op_rfl1, 0.2)
    xis = suites.test_functions()[:6]
    u, _ = picard_solve(op_rfl1, g, mu, CFG)
    assert weak_dual_residual(op_rfl1, u, g, mu, xis) <= 1e-8
    zero = TestFunction(lambda x: np.zeros(np.shape(x)[0]), "zero")
    assert weak_dual_residual(op_rfl1, u, g, mu, [zero], details=True)["members"] == [0.0]
    # linear response to a one-node perturbation
    i = m.n // 3
    v = u.values.copy()
    v[i] += 0.1
    d = weak_dual_residual(op_rfl1, v, g, mu, [ONE], details=True)
    xi = ONE(m.spec, m.nodes)
    t1 = float(v * xi @ m.weights)
    t2 = float(g(v) @ (op_rfl1.A @ xi * m.weights))
    t3 = op_rfl1.pair_with_measure(xi, mu)
    scale = abs(t1) + abs(t2) + abs(t3)
    assert d["max"] * scale == pytest.approx(abs(t1 + t2 - t3), rel=1e-9)
    assert d["max"] * scale >= 0.5 * 0.1 * xi[i] * m.weights[i]


# -- Kato ----------------------------------------------------------------------------

def test_kato_examples(op_rfl1):
    m = op_rfl1.mesh
    rep = kato_check(op_rfl1, 1.0 + m.x ** 2, None, ONE)
    assert abs(rep.abs) <= 1e-8 * rep.scale                  # equality case
    rep = kato_check(op_rfl1, np.sin(3 * m.x), None, ONE)
    assert rep.passed
    pair = _dirac(op_rfl1, 0.3) - _dirac(op_rfl1, -0.4)
    rep = kato_check(op_rfl1, np.zeros(m.n), pair, ONE)
    assert rep.main2 >= -1e-8 * rep.scale and rep.passed


def test_kato_suite(op_rfl1):
    checks = suites.kato_suite(op_rfl1)
    assert all(c.passed for c in checks), [c for c in checks if not c.passed][:3]


def test_invalid_test_function(op_rfl1):
    neg = TestFunction(lambda x: -np.ones(np.shape(x)[0]), "neg")
    with pytest.raises(InvalidTestFunctionError):
        kato_check(op_rfl1, np.ones(op_rfl1.n), None, neg)


def test_convex_profiles(op_rfl1):
    m = op_rfl1.mesh
    f = np.sin(3 * m.x)
    c = convex_kato_check(op_rfl1, f, ConvexProfile.pk(1), ONE)
    assert c["slack"] >= -1e-8 * c["scale"]
    zero = ConvexProfile(lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                         lambda t: np.zeros_like(np.asarray(t, dtype=float)), "zero")
    c = convex_kato_check(op_rfl1, f, zero, ONE)
    assert c["lhs"] == 0.0 and c["rhs"] == 0.0
    with pytest.raises(NonlinearityError):
        ConvexProfile(lambda t: 0.5 * np.asarray(t) ** 2, lambda t: np.asarray(t, dtype=float), "quad")


# -- comparison --------------------------------------------------------------------

def test_comparison_examples(op_small):
    g = Nonlinearity.power(3.0)
    m = op_small.mesh
    mu = _dirac(op_small, 0.2)
    c = comparison_test(op_small, g, mu, mu, CFG)
    assert np.array_equal(c["u1"].values, c["u2"].values)
    zero = RadonMeasure.zero(m.spec)
    one = RadonMeasure.from_density(GridFunction(m, np.ones(m.n)))
    c = comparison_test(op_small, g, zero, one, CFG)
    assert np.all(c["u1"].values == 0) and c["passed"]
    assert comparison_test(op_small, g, mu, mu.scaled(2.0), CFG)["passed"]
    with pytest.raises(OrderingError):
        comparison_test(op_small, g, mu.scaled(2.0), mu, CFG)


# -- properties ----------------------------------------------------------------------

locs = st.floats(-0.9, 0.9)
masses = st.floats(-3, 3)


@settings(max_examples=25)
@given(a=locs, b=locs, wa=masses, wb=masses, p=st.floats(1.05, 4.0), amp=st.floats(-2, 2))
def test_sandwich_and_uniqueness(op_small, a, b, wa, wb, p, amp):
    m = op_small.mesh
    mu = _dirac(op_small, a, wa) + _dirac(op_small, b, wb)
    mu = mu + RadonMeasure.from_density(GridFunction(m, amp * np.cos(2 * m.x)))
    g = Nonlinearity.power(p)
    u, rep = picard_solve(op_small, g, mu, CFG)
    env = TruncationEnvelope.from_measure(op_small, mu)
    assert np.all(u.values >= env.lower.values - 1e-8)
    assert np.all(u.values <= env.upper.values + 1e-8)
    starts = [env.lower.values, env.upper.values, np.zeros(m.n), np.sin(7 * m.x)]
    for s in starts:
        v, _ = picard_solve(op_small, g, mu, CFG, u0=s)
        assert l1_weighted(m, v.values - u.values, m.spec.gamma) <= 10 * CFG.tol


@settings(max_examples=25)
@given(a=locs, w=st.floats(0, 3), extra=st.floats(0, 3), b=locs, p=st.floats(1.05, 4.0),
       f=arrays(np.float64, 64, elements=st.floats(0, 2)))
def test_comparison_property(op_small, a, w, extra, b, p, f):
    m = op_small.mesh
    mu1 = _dirac(op_small, a, w)
    mu2 = mu1 + _dirac(op_small, b, extra) + RadonMeasure.from_density(GridFunction(m, f))
    assert comparison_test(op_small, Nonlinearity.power(p), mu1, mu2, CFG)["passed"]


@settings(max_examples=25)
@given(f1=arrays(np.float64, 64, elements=st.floats(-5, 5)), f2=arrays(np.float64, 64, elements=st.floats(-5, 5)),
       p=st.floats(1.0, 3.0))
def test_l1_contraction(op_small, f1, f2, p):
    m = op_small.mesh
    gam = m.spec.gamma
    g = Nonlinearity.power(p)
    u1, _ = picard_solve(op_small, g, RadonMeasure.from_density(GridFunction(m, f1)), CFG)
    u2, _ = picard_solve(op_small, g, RadonMeasure.from_density(GridFunction(m, f2)), CFG)
    xi = m.delta ** gam
    Gxi = op_small.A @ xi
    C = float(np.max(Gxi / xi))
    lhs = l1_weighted(m, u1.values - u2.values, gam) + float(np.abs(g(u1.values) - g(u2.values)) * Gxi @ m.weights)
    assert lhs <= C * l1_weighted(m, f1 - f2, gam) + 1e-8


@settings(max_examples=25)
@given(f=arrays(np.float64, 64, elements=st.floats(-5, 5)), k=st.integers(0, 7),
       a=locs, wa=masses)
def test_kato_property(op_small, f, k, a, wa):
    xi = suites.test_functions()[k]
    for mu in (None, _dirac(op_small, a, wa)):
        rep = kato_check(op_small, f, mu, xi)
        assert rep.passed, rep.to_dict()
    for kk in (1, 2, 4, 8):
        c = convex_kato_check(op_small, f, ConvexProfile.pk(kk), xi)
        assert c["slack"] >= -1e-8 * c["scale"]
