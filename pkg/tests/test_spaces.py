import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nlgreen import (DomainError, DomainSpec, GridFunction, NonlinearityError, Nonlinearity, build_mesh,
                     critical_exponent, lq_norm, marcinkiewicz_norm, marcinkiewicz_quasinorm, p_star,
                     subcritical_check)
from nlgreen.spaces import ExponentTable, admissible_range
from nlgreen.suites import marcinkiewicz_suite

MESH = build_mesh(DomainSpec(1, 0.25, 0.25), 256, 2.0)
MESH2 = build_mesh(DomainSpec(2, 0.5, 0.5), 12, 1.5)


def _u(values, mesh=MESH):
    return GridFunction(mesh, values)


def test_lq_examples():
    one = _u(np.ones(MESH.n))
    assert lq_norm(one, 1, 0) == pytest.approx(2.0, rel=1e-14)
    assert lq_norm(one, 1, 0.5) == pytest.approx(4 / 3, rel=1e-3)
    assert lq_norm(_u(MESH.delta ** -0.2), 1, 0.5) == pytest.approx(2 / 1.3, rel=1e-3)
    with pytest.raises(ValueError):
        lq_norm(one, 0.5, 0)


def test_quasinorm_examples():
    one = _u(np.ones(MESH.n))
    assert marcinkiewicz_quasinorm(one, 2, 0.5) == pytest.approx(math.sqrt(4 / 3), rel=1e-3)
    assert marcinkiewicz_quasinorm(_u(np.zeros(MESH.n)), 2, 0.5) == 0.0
    prof = _u(np.abs(MESH.x) ** -0.3)
    for q in (1.5, 2.0, 3.0):
        assert marcinkiewicz_quasinorm(prof, q, 0.25) <= lq_norm(prof, q, 0.25)


def test_norm_constant():
    c = 2.5
    u = _u(np.full(MESH.n, c))
    for q, a in ((2.0, 0.5), (1.5, 0.0)):
        mass = float(MESH.delta ** a @ MESH.weights)
        assert marcinkiewicz_norm(u, q, a) == pytest.approx(c * mass ** (1 / q), rel=1e-12)
    with pytest.raises(ValueError):
        marcinkiewicz_norm(u, 1.0, 0.0)


def test_random_audit_bounded():
    u = _u(np.abs(MESH.x - 0.3) ** -0.4)
    for q in (1.5, 2.0, 3.0):
        d = marcinkiewicz_norm(u, q, 0.25, n_random=100, seed=11, details=True)
        assert d["random"] <= q / (q - 1) * marcinkiewicz_quasinorm(u, q, 0.25)


@pytest.mark.parametrize("mesh,gamma", [(MESH, 0.25), (MESH2, 0.5)])
def test_corpus_equivalence(mesh, gamma):
    checks = marcinkiewicz_suite(mesh, gamma, seed=0)
    assert len(checks) == 12 * 3 * 2 * 2
    assert all(c.passed for c in checks)


def test_critical_exponent_examples():
    assert critical_exponent(2, 0.5, 0.5, 0.5) == pytest.approx(5 / 3, rel=1e-15)
    assert critical_exponent(3, 1 - 1e-15, 1, 0) == pytest.approx(3 / 2, rel=1e-12)
    assert critical_exponent(3, 1, 1, 0) == 3 / (3 - 1)
    assert critical_exponent(2, 0.5, 0.5, 0.0) == pytest.approx(4 / 3, rel=1e-15)
    with pytest.raises(DomainError):
        critical_exponent(1, 0.75, 0.0, 0.0)
    with pytest.raises(DomainError):
        critical_exponent(2, 0.5, -0.1, 0.0)


def test_admissible_range_examples():
    assert admissible_range(2, 0.5, 0.5) == pytest.approx((-0.5, 1.0))
    lo, hi = admissible_range(2, 0.5, 0.0)
    assert lo == pytest.approx(0.0) and hi == pytest.approx(0.0) and not lo < hi
    assert admissible_range(3, 0.25, 0.4) == pytest.approx((-0.1, 0.48))


def test_subcritical_examples():
    assert subcritical_check(Nonlinearity.power(1.5), 5 / 3).subcritical
    assert not subcritical_check(Nonlinearity.power(5 / 3), 5 / 3).subcritical
    assert subcritical_check(Nonlinearity.saturating(), 5 / 3).subcritical
    t = np.linspace(-10, 10, 41)
    assert subcritical_check(Nonlinearity.table(t, t ** 3), 1.5).subcritical   # flat beyond the table


def test_subcritical_rejects_nonmonotone():
    class Wiggle:
        kind = "custom"
        params = {}

        def __call__(self, t):
            return np.sin(np.asarray(t, dtype=float))
    with pytest.raises(NonlinearityError):
        subcritical_check(Wiggle(), 1.5)


# -- properties ----------------------------------------------------------------

values = arrays(np.float64, MESH.n, elements=st.floats(-1e3, 1e3, allow_nan=False))


@given(v=values, q=st.sampled_from([1.2, 1.5, 2.0, 3.0, 6.0]), a=st.floats(0, 1))
def test_marcinkiewicz_sandwich(v, q, a):
    u = _u(v)
    quasi = marcinkiewicz_quasinorm(u, q, a)
    norm = marcinkiewicz_norm(u, q, a, n_random=20)
    assert quasi <= norm * (1 + 1e-12) + 1e-300
    assert norm <= q / (q - 1) * quasi * (1 + 1e-12) + 1e-300


@given(v=values, q=st.floats(1.5, 5.0), r=st.floats(1.0, 1.4), a=st.floats(0, 1))
def test_weak_embedding(v, q, r, a):
    # int |u|^r <= q/(q-r) |Omega_a|^{1-r/q} quasi^r for r < q
    u = _u(v)
    vol = float(MESH.delta ** a @ MESH.weights)
    C = (q / (q - r)) ** (1 / r) * vol ** (1 / r - 1 / q)
    assert lq_norm(u, r, a) <= C * marcinkiewicz_quasinorm(u, q, a) * (1 + 1e-10) + 1e-300


@given(N=st.sampled_from([1, 2, 3]), s=st.floats(0.05, 0.95), g=st.floats(0.05, 1.0),
       b1=st.floats(0, 1), db=st.floats(0.01, 1), a=st.floats(0, 2), da=st.floats(0.01, 1))
def test_exponent_monotonicity(N, s, g, b1, db, a, da):
    if not N > 2 * s:
        return
    b2 = b1 + db
    a = max(a, b2 - 2 * s)
    assert critical_exponent(N, s, b2, a) < critical_exponent(N, s, b1, a)
    assert critical_exponent(N, s, b1, a + da) > critical_exponent(N, s, b1, a)
    assert critical_exponent(N, s, g, g) == p_star(N, s, g)
    t = ExponentTable.build(N, s, g)
    assert t.p_star == t.p_beta_alpha == p_star(N, s, g)
    if a > b1 - 2 * s:
        assert critical_exponent(N, s, b1, a) > 1


@given(p=st.floats(1.01, 3.0), N=st.sampled_from([1, 2]), s=st.floats(0.1, 0.45), g=st.floats(0.1, 1.0))
def test_power_subcritical_iff_below(p, N, s, g):
    ps = p_star(N, s, g)
    if abs(p - ps) < 1e-9:
        return
    assert subcritical_check(Nonlinearity.power(p), ps).subcritical == (p < ps)
