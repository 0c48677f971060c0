import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlgreen import DomainError, DomainSpec, build_mesh, distance_to_boundary


def test_uniform_interval_partition():
    m = build_mesh(DomainSpec(1, 0.25, 0.25), 8, 1.0)
    assert m.n == 8
    assert np.allclose(m.weights, 0.25)
    assert math.isclose(m.weights.sum(), 2.0, rel_tol=1e-14)


def test_disk_area():
    m = build_mesh(DomainSpec(2, 0.5, 0.5), 8, 1.0)
    assert abs(m.weights.sum() - math.pi) / math.pi < 1e-6


def test_graded_boundary_cells():
    m = build_mesh(DomainSpec(1, 0.25, 0.25), 64, 2.0)
    interior = m.diameters[~m.layer].max()
    assert m.diameters.min() <= 0.25 * interior


@pytest.mark.parametrize("N,res", [(1, 64), (2, 12)])
def test_layer_refined(N, res):
    m = build_mesh(DomainSpec(N, 0.25, 0.25), res, 2.0)
    assert m.diameters[m.layer].max() <= 0.5 * m.diameters[~m.layer].max()


def test_distance_examples():
    assert distance_to_boundary(DomainSpec(1, 0.25, 0.25), 0.0) == pytest.approx(1.0)
    assert distance_to_boundary(DomainSpec(1, 0.25, 0.25), 0.75) == pytest.approx(0.25)
    assert distance_to_boundary(DomainSpec(2, 0.5, 0.5), [0.3, 0.4]) == pytest.approx(0.5)


def test_distance_outside_rejected():
    with pytest.raises(DomainError):
        distance_to_boundary(DomainSpec(1, 0.25, 0.25), 1.5)


@pytest.mark.parametrize("kw", [dict(N=1, s=0.5, gamma=0.5), dict(N=1, s=0.75, gamma=0.5),
                                dict(N=2, s=1.0, gamma=0.5), dict(N=1, s=0.25, gamma=0.0),
                                dict(N=1, s=0.25, gamma=1.5)])
def test_spec_rejects(kw):
    with pytest.raises(DomainError):
        DomainSpec(**kw)


def test_build_mesh_rejects():
    with pytest.raises(DomainError):
        build_mesh(DomainSpec(3, 0.5, 0.5), 8)
    with pytest.raises(DomainError):
        build_mesh(DomainSpec(1, 0.25, 0.25), 3)
    with pytest.raises(DomainError):
        build_mesh(DomainSpec(1, 0.25, 0.25), 8, 0.5)


def test_json_export():
    m = build_mesh(DomainSpec(1, 0.25, 0.25), 8, 2.0)
    d = json.loads(m.to_json())
    assert set(d) == {"nodes", "weights", "delta"}
    assert len(d["nodes"]) == 8


# -- properties -------------------------------------------------------------

@given(N=st.sampled_from([1, 2]), res=st.integers(4, 40), q=st.floats(1.0, 3.0), R=st.floats(0.3, 3.0))
def test_mesh_invariants(N, res, q, R):
    m = build_mesh(DomainSpec(N, 0.25, 0.25, R), res, q)
    assert np.all(m.delta > 0)
    assert np.all(m.weights > 0)
    vol = m.spec.volume
    assert abs(m.weights.sum() - vol) / vol < 1e-6
    assert np.allclose(m.delta, R - np.linalg.norm(m.nodes, axis=1))


@given(N=st.sampled_from([1, 2]), res=st.integers(4, 30), q=st.floats(1.0, 3.0))
def test_mesh_determinism(N, res, q):
    a = build_mesh(DomainSpec(N, 0.25, 0.25), res, q)
    b = build_mesh(DomainSpec(N, 0.25, 0.25), res, q)
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.hash == b.hash


def _delta_moment_exact(N, alpha, R=1.0):
    if N == 1:
        return 2 * R ** (1 + alpha) / (1 + alpha)
    # 2 pi int_0^R (R - r)^alpha r dr
    return 2 * math.pi * R ** (2 + alpha) / ((1 + alpha) * (2 + alpha))


@given(N=st.sampled_from([1, 2]), alpha=st.floats(0.0, 2.0))
def test_delta_moment_convergence(N, alpha):
    spec = DomainSpec(N, 0.25, 0.25)
    exact = _delta_moment_exact(N, alpha)
    res = (32, 64, 128) if N == 1 else (8, 16, 32)
    err = []
    for r in res:
        m = build_mesh(spec, r, 2.0)
        err.append(abs(m.integrate(m.delta ** alpha) - exact))
    if err[2] < 1e-10:          # exact up to roundoff (alpha = 0, or alpha = 1 on the interval)
        return
    assert math.log2(err[1] / err[2]) >= 1.0
