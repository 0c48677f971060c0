"""Shared fixtures: the four preset operators, assembled once per session."""
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlgreen import DomainSpec, assemble, build_mesh, make_backend

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


#: criterion number -> list of (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, passed, detail)``; returns ``passed``."""
    def record(n, passed, detail, note=False):
        passed = bool(passed)
        ACCEPTANCE.setdefault(n, []).append((None if note else passed, detail))
        tag = "note" if note else ("PASS" if passed else "FAIL")
        print(f"criterion {n:2d} {tag}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        gated = [(p, d) for p, d in ACCEPTANCE[n] if p is not None]
        ok = all(p for p, _ in gated)
        parts = "; ".join(d if p else f"[fail] {d}" for p, d in gated)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {parts}")
        for p, d in ACCEPTANCE[n]:
            if p is None:
                terminalreporter.write_line(f"              note: {d}")


def _op(variant, N, s, gamma, res, grading):
    spec = DomainSpec(N, s, gamma)
    return assemble(make_backend(variant, spec), build_mesh(spec, res, grading))


@pytest.fixture(scope="session")
def spec1():
    return DomainSpec(1, 0.25, 0.25)


@pytest.fixture(scope="session")
def op_rfl1():
    return _op("rfl", 1, 0.25, 0.25, 256, 2.0)


@pytest.fixture(scope="session")
def op_sfl1():
    return _op("sfl", 1, 0.25, 1.0, 256, 2.0)


@pytest.fixture(scope="session")
def op_rfl2():
    return _op("rfl", 2, 0.5, 0.5, 18, 1.5)


@pytest.fixture(scope="session")
def op_cfl2():
    return _op("cfl", 2, 0.75, 0.5, 18, 1.5)


@pytest.fixture(scope="session")
def op_small():
    """Coarse RFL interval operator for property tests that solve repeatedly."""
    return _op("rfl", 1, 0.25, 0.25, 64, 2.0)


@pytest.fixture(params=["op_rfl1", "op_sfl1", "op_rfl2", "op_cfl2"])
def any_op(request):
    return request.getfixturevalue(request.param)


def first_axis(N, value):
    x = np.zeros(N)
    x[0] = value
    return x


DISK_PLAN = {"kernel": {"kernel": "rfl", "N": 2, "s": 0.5}, "mesh": {"resolution": 18, "grading": 1.5},
             "z": (1.0, 0.0)}


@pytest.fixture(scope="session")
def disk_boundary():
    """Boundary marching and Martin source decay on the RFL disk (s = gamma = 1/2, p = 1.3)."""
    from nlgreen.experiments import ExperimentPlan, boundary_singularity_run, martin_source_decay
    plan = ExperimentPlan(**DISK_PLAN)
    return boundary_singularity_run(plan), martin_source_decay(plan)


@pytest.fixture(scope="session")
def interval_boundary():
    """The same run on the RFL interval (s = gamma = 1/4, n = 512): diagnostics only."""
    from nlgreen.experiments import ExperimentPlan, boundary_singularity_run
    return boundary_singularity_run(ExperimentPlan())
