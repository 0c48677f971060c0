import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nlgreen import (AtomCollisionError, DomainSpec, GridFunction, MeshMismatchError, RadonMeasure, SizeGuardError,
                     WindowError, assemble, asymmetry, build_mesh, duality_gap, make_backend,
                     make_split, singular_value_decay, translation_equicontinuity)
from nlgreen.greenop import (DiscreteGreenOperator, TestFunction, marcinkiewicz_continuity, nudge_off_nodes,
                             sup_bound_check)
from nlgreen.kernels import envelope_shape
from nlgreen.quadrature import green_apply_reference
from nlgreen import suites
from nlgreen.suites import compactness_suite, duality_suite, translation_family

SUP_RATIO_FROZEN = 0.9647173310050089     # f = 1, RFL interval s = 1/4, n = 256, r = 3 (first run)
SIGMA_RATIO_FROZEN = 0.1748576615820382   # sigma_20 / sigma_1, same operator (first run)


def torsion(x, N, s):
    """Closed-form ``G[1]`` for the restricted fractional Laplacian on the unit ball."""
    r2 = np.sum(np.atleast_2d(x) ** 2, axis=1)
    return (1 - r2) ** s * math.gamma(N / 2) / (4 ** s * math.gamma(1 + s) * math.gamma(N / 2 + s))


def test_entries_and_symmetry(any_op):
    assert np.all(any_op.A >= 0)
    assert np.all(np.isfinite(any_op.A))
    assert asymmetry(any_op) <= 1e-12
    K = any_op.A / any_op.mesh.weights[None, :]
    off = ~np.eye(any_op.n, dtype=bool)
    assert np.max(np.abs(K - K.T)[off] / K[off]) <= 1e-10


def test_surrogate_entries_are_envelope(op_cfl2):
    m = op_cfl2.mesh
    E = envelope_shape(m.spec, m.nodes[:, None, :], m.nodes[None, :, :]) * m.weights[None, :]
    off = ~np.eye(m.n, dtype=bool)
    assert np.allclose(op_cfl2.A[off], E[off], rtol=1e-14, atol=0)


@pytest.mark.parametrize("N,s,res,q", [(1, 0.25, (64, 128, 256), 2.0), (2, 0.5, (8, 16, 32), 1.5)])
def test_row_sums_torsion(N, s, res, q):
    spec = DomainSpec(N, s, s)
    errs = []
    for r in res:
        m = build_mesh(spec, r, q)
        op = assemble(make_backend("rfl", spec), m)
        t = torsion(m.nodes, N, s)
        errs.append(float(np.abs(op.A.sum(axis=1) - t) @ (m.delta ** s * m.weights)))
    assert errs[-1] < 1e-3
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


def test_apply_density_examples(op_rfl1):
    m = op_rfl1.mesh
    assert np.all(op_rfl1.apply_density(GridFunction(m, np.zeros(m.n))).values == 0)
    f = GridFunction(m, m.delta ** 0.25)
    q = op_rfl1.apply_density(f).values / m.delta ** 0.25
    assert 0.5 < q.min() and q.max() < 2.0
    other = build_mesh(m.spec, 32, 2.0)
    with pytest.raises(MeshMismatchError):
        op_rfl1.apply_density(GridFunction(other, np.ones(other.n)))


def test_apply_measure_examples(any_op):
    sp = any_op.spec
    y = nudge_off_nodes(any_op, np.full(sp.N, 0.2345))
    col = any_op.apply_measure(RadonMeasure.dirac(sp, y)).values
    assert np.array_equal(col, np.ravel(any_op.backend.green(any_op.mesh.nodes, np.broadcast_to(y, any_op.mesh.nodes.shape))))
    a = RadonMeasure.dirac(sp, y, 2.0)
    b = RadonMeasure.dirac(sp, nudge_off_nodes(any_op, -0.5 * y), -1.0)
    assert np.allclose(any_op.apply_measure(a - b).values,
                       any_op.apply_measure(a).values - any_op.apply_measure(b).values, rtol=1e-14, atol=0)
    with pytest.raises(AtomCollisionError):
        any_op.apply_measure(RadonMeasure.dirac(sp, any_op.mesh.nodes[3]))


def test_duality_and_order(op_rfl1):
    sp = op_rfl1.spec
    coarse = duality_suite(op_rfl1)
    assert all(c.passed for c in coarse)
    fine_op = assemble(op_rfl1.backend, build_mesh(sp, 512, 2.0))
    fine = duality_suite(fine_op)
    for c, f in zip(coarse, fine):
        assert c.value / f.value >= 2.0


def test_duality_disk(op_rfl2):
    assert all(c.passed for c in duality_suite(op_rfl2))


def test_sup_bound(op_rfl1):
    m = op_rfl1.mesh
    one = sup_bound_check(op_rfl1, GridFunction(m, np.ones(m.n)), 3.0)
    assert one["ratio"] == pytest.approx(SUP_RATIO_FROZEN, rel=1e-10)
    assert np.all(np.diff(one["modulus"]) < 0)         # continuous profile: modulus shrinks with h
    rng = np.random.default_rng(0)
    for _ in range(5):
        noise = sup_bound_check(op_rfl1, GridFunction(m, rng.uniform(0, 1, m.n)), 3.0)
        assert one["ratio"] / 2 <= noise["ratio"] <= 2 * one["ratio"]
    assert sup_bound_check(op_rfl1, GridFunction(m, np.zeros(m.n)), 3.0)["ratio"] == 0.0
    with pytest.warns(RuntimeWarning):
        sup_bound_check(op_rfl1, GridFunction(m, np.ones(m.n)), 2.0)


def test_translation(op_rfl1, op_rfl2):
    for op in (op_rfl1, op_rfl2):
        fam = translation_family(op.spec)
        win = (-0.5, 0.5) if op.spec.N == 1 else 0.5
        assert translation_equicontinuity(op, fam, 0.0, win) == 0.0
        vals = [translation_equicontinuity(op, fam, h, win) for h in (0.2, 0.1, 0.05)]
        assert vals[0] > vals[1] > vals[2] > 0
        d = translation_equicontinuity(op, fam, 0.1, win, diagnostics=True)
        assert d["value"] == pytest.approx(vals[1])
        assert d["J1"] + d["J2"] + d["J3"] >= d["value"] * (1 - 1e-12)
        with pytest.raises(WindowError):
            translation_equicontinuity(op, fam, 0.6, win)


def test_near_field_terms_scale(op_rfl1):
    # near-field parts J1, J2 shrink with the split radius like eps^{2s} (up to the same band)
    fam = translation_family(op_rfl1.spec)
    out = []
    for eps in (0.1, 0.05):
        op = DiscreteGreenOperator(op_rfl1.mesh, op_rfl1.backend, make_split(op_rfl1.spec, eps),
                                   op_rfl1.A, op_rfl1.report)
        d = translation_equicontinuity(op, fam, 0.05, (-0.5, 0.5), diagnostics=True)
        out.append(d["J1"] + d["J2"])
    q = out[0] / out[1]
    assert 2 ** 0.5 / 2 <= q <= 2 ** 0.5 * 2


def test_singular_values(op_rfl1, op_sfl1):
    sv = singular_value_decay(op_rfl1)
    assert np.all(np.diff(sv) <= 1e-12 * sv[0])
    assert sv[19] / sv[0] == pytest.approx(SIGMA_RATIO_FROZEN, rel=1e-8)
    b = op_sfl1.backend
    sv = singular_value_decay(op_sfl1, k=10)
    lam = np.ravel(b.eigenvalues(np.arange(1, 11))) ** -0.25
    assert np.all(np.abs(sv / lam - 1) < 0.05)


def test_size_guard():
    spec = DomainSpec(2, 0.5, 0.5)
    m = build_mesh(spec, 40, 1.0)
    assert m.n > 4000
    op = DiscreteGreenOperator(m, make_backend("rfl", spec), make_split(spec, 0.1), np.zeros((m.n, m.n)), None)
    with pytest.raises(SizeGuardError):
        singular_value_decay(op)


def test_marcinkiewicz_continuity_band(op_rfl1):
    for gp, a in ((0.25, 0.25), (0.0, 0.0), (0.25, 0.0)):
        band = marcinkiewicz_continuity(op_rfl1, gp, a)["band"]
        assert 0 < band[0] <= band[1] < 4 * band[0]


def test_refinement_order_smooth_density():
    spec = DomainSpec(1, 0.25, 0.25)
    b = make_backend("rfl", spec)
    x0 = np.array([[0.1], [-0.35], [0.6]])
    phi = lambda p: np.cos(2 * np.ravel(p))
    ref = np.array([green_apply_reference(b, phi, x) for x in x0])
    errs = []
    for r in (64, 128, 256):
        m = build_mesh(spec, r, 2.0)
        op = assemble(b, m)
        u = op.A @ np.cos(2 * m.x)
        errs.append(np.max(np.abs(np.interp(x0[:, 0], m.x, u) - ref)))
    assert math.log2(errs[1] / errs[2]) >= 1.0


def test_save_load(tmp_path, op_rfl2):
    p = tmp_path / "op.bin"
    op_rfl2.save(p)
    back = DiscreteGreenOperator.load(p, op_rfl2.mesh, op_rfl2.backend)
    assert np.array_equal(back.A, op_rfl2.A)
    assert back.header() == op_rfl2.header()


def test_compactness_suite_rows(op_rfl1):
    rows = {c.check: c for c in compactness_suite(op_rfl1)}
    assert rows["translation_decreasing"].passed
    assert rows["near_field_scaling"].passed


# -- properties ----------------------------------------------------------------

@given(f=arrays(np.float64, 64, elements=st.floats(-10, 10)), g=arrays(np.float64, 64, elements=st.floats(-10, 10)),
       a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity_positivity(op_small, f, g, a, b):
    A = op_small.A
    lhs = A @ (a * f + b * g)
    rhs = a * (A @ f) + b * (A @ g)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (np.abs(A) @ (np.abs(a * f) + np.abs(b * g)) + 1e-300))
    assert np.all(A @ np.abs(f) >= 0)


@settings(max_examples=8)
@given(y=st.floats(-0.8, 0.8), k=st.integers(0, 7))
def test_duality_property(op_rfl1, y, k):
    xi = suites.test_functions()[k]
    yy = nudge_off_nodes(op_rfl1, [y])
    d = duality_gap(op_rfl1, RadonMeasure.dirac(op_rfl1.spec, yy), xi)
    assert d["gap"] <= 1e-3 * max(d["scale"], 1e-2)
