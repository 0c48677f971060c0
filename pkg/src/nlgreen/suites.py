"""Property suites shared by the CLI commands.

Each suite returns a list of :class:`Check` rows ``(suite, check, value,
threshold, passed)``.  Values are deterministic functions of the operator
and the seed, so the CSV emitted by ``verify`` is reproducible byte for
byte.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .greenop import (TestFunction, asymmetry, duality_gap, nudge_off_nodes, singular_value_decay,
                      translation_equicontinuity)
from .kernels import envelope_band, make_split, martin_limit
from .measures import RadonMeasure
from .quadrature import near_field_integral
from .solver import (ConvexProfile, Nonlinearity, SolverConfig, comparison_test, convex_kato_check,
                     kato_check, monotone_solve, picard_solve, TruncationEnvelope)
from .spaces import GridFunction, l1_weighted, lq_norm, marcinkiewicz_norm, marcinkiewicz_quasinorm

ROUNDOFF = 1e-12


@dataclass(frozen=True)
class Check:
    suite: str
    check: str
    value: float
    threshold: float
    passed: bool

    def row(self) -> list:
        return [self.suite, self.check, float(self.value), float(self.threshold), bool(self.passed)]


HEADER = ["suite", "check", "value", "threshold", "passed"]


def _x1(pts):
    a = np.asarray(pts, dtype=float)
    return a if a.ndim == 1 else a[:, 0]


def _r(pts):
    a = np.asarray(pts, dtype=float)
    return np.abs(a) if a.ndim == 1 else np.linalg.norm(a, axis=1)


def test_functions() -> list[TestFunction]:
    """Eight factors ``w``; ``xi = delta^gamma w``.  The last two change sign."""
    return [
        TestFunction(lambda x: np.ones(np.shape(x)[0]), "one"),
        TestFunction(lambda x: 1.0 + 0.5 * np.cos(3 * _x1(x)), "cos3"),
        TestFunction(lambda x: 1.0 + 0.9 * np.sin(5 * _x1(x)), "sin5"),
        TestFunction(lambda x: np.exp(_x1(x)), "exp"),
        TestFunction(lambda x: 1.5 + _x1(x), "ramp"),
        TestFunction(lambda x: np.exp(-8 * _r(x) ** 2), "bump"),
        TestFunction(lambda x: 1.0 - 1.3 * np.exp(-((_x1(x) - 0.4) / 0.08) ** 2), "dip"),
        TestFunction(lambda x: 1.0 + 1.1 * np.cos(6 * _x1(x)), "wave"),
    ]


def atom_pair(op, masses=(1.0, -1.0)) -> RadonMeasure:
    sp = op.spec
    a, b = np.zeros(sp.N), np.zeros(sp.N)
    a[0], b[0] = 0.3011, -0.4013
    if sp.N == 2:
        a[1], b[1] = 0.1, 0.2
    a, b = nudge_off_nodes(op, a), nudge_off_nodes(op, b)
    return RadonMeasure.atoms(sp, np.vstack([a, b]), list(masses))


def kato_data(op) -> list[tuple[str, np.ndarray, RadonMeasure | None]]:
    """Data ``(name, f, mu)``: nonnegative, mixed-sign and weighted-singular
    densities, a signed Dirac pair, and a pair on top of mixed ``f``."""
    m = op.mesh
    x1 = m.nodes[:, 0]
    mixed = np.sin(3 * x1) + 0.3 * x1
    return [
        ("f_pos", 1.0 + x1 ** 2, None),
        ("f_mixed", mixed, None),
        ("f_singular", m.delta ** -0.3 * np.cos(2 * x1), None),
        ("dirac_pair", np.zeros(m.n), atom_pair(op)),
        ("mixed_plus_pair", mixed, atom_pair(op, (2.0, -1.0))),
    ]


def kato_suite(op, tol: float = 1e-8, ks=(1, 2, 4, 8), k_limit: float = 1e10) -> list[Check]:
    """Four Kato inequalities over every (xi, datum) pair, the ``p_k`` family,
    and the ``k -> inf`` limit against the absolute-value inequality."""
    out = []
    for xi in test_functions():
        for name, f, mu in kato_data(op):
            rep = kato_check(op, f, mu, xi, tol)
            for key, val in rep.slacks().items():
                out.append(Check("kato", f"{key}[{xi.name},{name}]", val / rep.scale, -tol, val >= -tol * rep.scale))
            if mu is not None:
                continue
            for k in ks:
                c = convex_kato_check(op, f, ConvexProfile.pk(k), xi)
                out.append(Check("kato", f"p_{k}[{xi.name},{name}]", c["slack"] / c["scale"], -tol,
                                 c["slack"] >= -tol * c["scale"]))
            lim = convex_kato_check(op, f, ConvexProfile.pk(k_limit), xi)
            u = op.A @ f
            w = op.mesh.weights
            xv = xi(op.spec, op.mesh.nodes)
            lhs_abs = float(np.abs(u) * xv @ w)
            rhs_abs = float(np.sign(u) * f * (op.A @ xv) @ w)
            dev = max(abs(lim["lhs"] - lhs_abs), abs(lim["rhs"] - rhs_abs)) / lim["scale"]
            out.append(Check("kato", f"p_limit[{xi.name},{name}]", dev, 1e-6, dev <= 1e-6))
    return out


def function_corpus(mesh, seed: int = 0) -> list[GridFunction]:
    """Twelve grid functions with flat, singular, oscillating and random profiles."""
    x1 = mesh.nodes[:, 0]
    r = np.linalg.norm(mesh.nodes, axis=1)
    d = mesh.delta
    rng = np.random.default_rng(seed)
    prof = {
        "const": np.ones(mesh.n),
        "delta_m02": d ** -0.2,
        "delta_p05": d ** 0.5,
        "radial_m03": np.maximum(r, 1e-3) ** -0.3,
        "radial_m06": np.maximum(r, 1e-3) ** -0.6,
        "cos3": np.cos(3 * x1),
        "linear": x1,
        "exp": np.exp(2 * x1),
        "step": np.where(x1 > 0.2, 2.0, 0.5),
        "noise": rng.standard_normal(mesh.n),
        "log_delta": np.log(d),
        "spike": 1.0 / (1e-2 + (x1 - 0.3) ** 2),
    }
    return [GridFunction(mesh, v, k) for k, v in prof.items()]


def marcinkiewicz_rows(mesh, gamma: float, seed: int = 0, qs=(1.5, 2.0, 3.0)) -> list[list]:
    """Rows ``(name, q, alpha, lq, weak_quasi, weak_norm)`` over the corpus."""
    rows = []
    for u in function_corpus(mesh, seed):
        for q in qs:
            for a in (0.0, gamma):
                rows.append([u.label, q, a, lq_norm(u, q, a), marcinkiewicz_quasinorm(u, q, a),
                             marcinkiewicz_norm(u, q, a, seed=seed)])
    return rows


def marcinkiewicz_checks(rows) -> list[Check]:
    """Both sides of the norm equivalence for each row of :func:`marcinkiewicz_rows`."""
    out = []
    for name, q, a, _, quasi, norm in rows:
        lo = quasi - norm                    # <= 0
        hi = norm - q / (q - 1) * quasi      # <= 0
        tag = f"[{name},q={q:g},alpha={a:g}]"
        out.append(Check("marcinkiewicz", "lower" + tag, lo / max(norm, 1e-300), ROUNDOFF,
                         lo <= ROUNDOFF * norm))
        out.append(Check("marcinkiewicz", "upper" + tag, hi / max(norm, 1e-300), ROUNDOFF,
                         hi <= ROUNDOFF * norm))
    return out


def marcinkiewicz_suite(mesh, gamma: float, seed: int = 0, qs=(1.5, 2.0, 3.0)) -> list[Check]:
    return marcinkiewicz_checks(marcinkiewicz_rows(mesh, gamma, seed, qs))


def envelope_suite(backend, seed: int = 0, n_pairs: int = 10_000) -> list[Check]:
    c1, c2 = envelope_band(backend, n_pairs, seed)
    if backend.label == "exact":
        return [Check("envelope", "band_ratio", c2 / c1, 50.0, c2 / c1 <= 50.0)]
    return [Check("envelope", "band_ratio", c2 / c1, 1.0, c2 == c1)]


def martin_suite(backend) -> list[Check]:
    sp = backend.spec
    z = np.zeros(sp.N)
    z[0] = sp.R
    out = []
    for t in (0.0, 0.3, -0.5):
        x = np.zeros(sp.N)
        x[0] = t
        if sp.N == 2:
            x[1] = 0.2
        exact = float(np.ravel(backend.martin(x, z))[0])
        lim = martin_limit(backend, x, z)
        rel = abs(exact - lim) / exact
        out.append(Check("martin", f"limit[x1={t:g}]", rel, 1e-2, rel <= 1e-2))
    return out


def operator_suite(op) -> list[Check]:
    asym = asymmetry(op)
    return [Check("operator", "asymmetry", asym, 1e-12, asym <= 1e-12),
            Check("operator", "min_entry", float(op.A.min()), 0.0, float(op.A.min()) >= 0.0)]


def duality_suite(op, tol: float = 1e-3) -> list[Check]:
    out = []
    mu = atom_pair(op, (1.0, 1.0))
    for xi in test_functions()[:2]:
        for k in range(mu.n_atoms):
            d = duality_gap(op, RadonMeasure.dirac(op.spec, mu.locations[k]), xi)
            rel = d["gap"] / d["scale"]
            out.append(Check("duality", f"gap[{xi.name},atom{k}]", rel, tol, rel <= tol))
    return out


def solver_suite(op, tol: float = 1e-10, monotone: bool = True) -> list[Check]:
    """Linear oracle, sandwich on Dirac data, 5-start uniqueness, monotone bracket and comparison.

    ``monotone=False`` skips the bracket, whose iteration relies on the
    discrete comparison principle that estimate-class kernels lack.
    """
    sp, m = op.spec, op.mesh
    cfg = SolverConfig(tol=tol)
    out = []
    f = np.cos(2 * m.nodes[:, 0]) + 0.3
    mu_f = RadonMeasure.from_density(GridFunction(m, f))
    u, _ = picard_solve(op, Nonlinearity.linear(), mu_f, cfg)
    ud = np.linalg.solve(np.eye(m.n) + op.A, op.A @ f)
    rel = l1_weighted(m, u.values - ud, sp.gamma) / l1_weighted(m, ud, sp.gamma)
    out.append(Check("solver", "linear_oracle", rel, 1e-8, rel <= 1e-8))
    g = Nonlinearity.power(3.0)
    centre = nudge_off_nodes(op, np.zeros(sp.N))
    data = {"unit_dirac": RadonMeasure.unit_dirac(sp, centre), "signed_pair": atom_pair(op, (1.0, -1.5))}
    for name, mu in data.items():
        u, rep = picard_solve(op, g, mu, cfg)
        out.append(Check("solver", f"sandwich[{name}]", rep.sandwich_violation, 1e-8,
                         rep.sandwich_violation <= 1e-8))
        env = TruncationEnvelope.from_measure(op, mu)
        lo_v, hi_v = env.lower.values, env.upper.values
        starts = [np.zeros(m.n), lo_v, hi_v, 0.5 * (lo_v + hi_v), np.sin(5 * m.nodes[:, 0])]
        sols = [picard_solve(op, g, mu, cfg, u0=s)[0].values for s in starts]
        spread = max(l1_weighted(m, s - sols[0], sp.gamma) for s in sols)
        out.append(Check("solver", f"uniqueness[{name}]", spread, 10 * tol, spread <= 10 * tol))
        if not monotone:
            continue
        lo, hi, _ = monotone_solve(op, g, mu, cfg)
        inside = float(max(np.max(lo.values - u.values), np.max(u.values - hi.values)))
        out.append(Check("solver", f"bracket[{name}]", inside, 10 * tol, inside <= 10 * tol))
    pairs = [(data["unit_dirac"], data["unit_dirac"].scaled(2.0)),
             (RadonMeasure.zero(sp), RadonMeasure.from_density(GridFunction(m, np.ones(m.n)))),
             (data["signed_pair"], data["signed_pair"] + RadonMeasure.dirac(sp, centre))]
    for k, (a, b) in enumerate(pairs):
        c = comparison_test(op, g, a, b, cfg)
        out.append(Check("solver", f"comparison[{k}]", c["max_excess"], 1e-8, c["passed"]))
    return out


def translation_family(spec, n_atoms: int = 20, seed: int = 0, spread: float = 0.45) -> list[RadonMeasure]:
    """Unit Diracs at random lattice vertices of ``[-spread, spread]^N``.

    The lattice matches the default sampling lattice of
    :func:`~nlgreen.greenop.translation_equicontinuity`.
    """
    step = spec.R / (1024 if spec.N == 1 else 256)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_atoms):
        y = np.round(rng.uniform(-spread, spread, spec.N) / step) * step
        out.append(RadonMeasure.dirac(spec, y, 1.0))
    return out


def compactness_suite(op, seed: int = 0, hs=(0.2, 0.1, 0.05, 0.025), n_sv: int = 20,
                      sv_ratio: float = 0.1, eps: float = 0.2) -> list[Check]:
    """Translation test under halving of ``h``, singular value ratio
    ``sigma_n_sv / sigma_1`` and the near-field scaling ``I(eps) / I(eps/2)``."""
    sp = op.spec
    out = []
    win = (-0.5, 0.5) if sp.N == 1 else 0.5
    fam = translation_family(sp, seed=seed)
    vals = [translation_equicontinuity(op, fam, h, win) for h in hs]
    for h, v in zip(hs, vals):
        out.append(Check("compactness", f"translation[h={h:g}]", v, float("nan"), True))
    dec = bool(np.all(np.diff(vals) < 0))
    out.append(Check("compactness", "translation_decreasing", float(np.max(np.diff(vals))), 0.0, dec))
    sv = singular_value_decay(op)
    r = float(sv[n_sv - 1] / sv[0])
    out.append(Check("compactness", f"sigma{n_sv}_over_sigma1", r, sv_ratio, r < sv_ratio))
    y = np.full(sp.N, 0.05)
    nf = [near_field_integral(op.backend, make_split(sp, e), y, win) for e in (eps, eps / 2)]
    q = nf[0] / nf[1]
    lo, hi = 2 ** (2 * sp.s) / 2, 2 ** (2 * sp.s) * 2
    out.append(Check("compactness", "near_field_scaling", q, hi, lo <= q <= hi))
    return out
