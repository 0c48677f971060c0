"""Weak-dual solutions of ``u + G[g(u)] = G[mu]`` and the Kato inequalities.

The fixed point is constructed as in the existence argument: the absorption
is truncated at the envelope ``V- = -G[mu-] <= v <= V+ = G[mu+]`` and the
truncated map ``T(v) = G[mu] - G[h(v)]`` is iterated with damping.  After
convergence the iterate lies inside the envelope, so ``h(u) = g(u)`` and
``u`` solves the untruncated problem.

All integrals are discrete midpoint sums on the operator's mesh, and atom
terms use exact kernel columns.  Solutions with an atom-free affine
forcing ``F >= 0`` (for example a Martin kernel) are handled by the
``forcing`` argument; the envelope is then ``[0, F]``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import (DivergenceError, GoodMeasureError, InvalidTestFunctionError,
                         MonotonicityError, NonlinearityError, OrderingError)
from .greenop import DiscreteGreenOperator, TestFunction
from .measures import RadonMeasure, split_signs
from .nonlinearity import Nonlinearity
from .spaces import GridFunction, l1_weighted, p_star, subcritical_check

__all__ = ["Nonlinearity", "SolverConfig", "TruncationEnvelope", "SolveReport", "truncate_h",
           "picard_solve", "monotone_solve", "weak_dual_residual", "KatoReport", "kato_check",
           "ConvexProfile", "convex_kato_check", "comparison_test", "criticality_gate"]

#: Picard doubles a halved damping (up to the configured value) after this many decreasing steps.
RECOVER_AFTER = 8


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    Parameters
    ----------
    tol : float
        Stop when ``||u + G[g(u)] - F||_{L^1(delta^gamma)} <= tol``.
    max_iter : int
    damping : float
        Initial relaxation ``theta`` in ``(0, 1]``; halved whenever the
        residual grows.
    min_damping : float
        Give up once ``theta`` falls below this value.  A halved ``theta``
        is doubled again after ``RECOVER_AFTER`` consecutive decreasing steps.
    """

    tol: float = 1e-10
    max_iter: int = 5000
    damping: float = 0.5
    min_damping: float = 1e-6

    def __post_init__(self):
        if not (0 < self.damping <= 1):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverConfig":
        return cls(**(d or {}))

    def to_dict(self) -> dict:
        return {"tol": self.tol, "max_iter": self.max_iter, "damping": self.damping,
                "min_damping": self.min_damping}


@dataclass(frozen=True, eq=False)
class TruncationEnvelope:
    """Sub/supersolution bracket ``(V-, V+)`` with ``V- <= 0 <= V+``."""

    lower: GridFunction
    upper: GridFunction

    def __post_init__(self):
        self.lower.same_mesh(self.upper)
        if np.any(self.lower.values > 0) or np.any(self.upper.values < 0):
            raise ValueError("envelope must satisfy V- <= 0 <= V+ nodewise")

    @classmethod
    def from_measure(cls, op: DiscreteGreenOperator, mu: RadonMeasure) -> "TruncationEnvelope":
        plus, minus = split_signs(mu)
        up = op.apply_measure(plus).values
        lo = -op.apply_measure(minus).values
        return cls(GridFunction(op.mesh, lo, "V-"), GridFunction(op.mesh, up, "V+"))

    @classmethod
    def from_forcing(cls, mesh, forcing) -> "TruncationEnvelope":
        F = np.asarray(forcing, dtype=float)
        return cls(GridFunction(mesh, np.minimum(F, 0.0), "V-"), GridFunction(mesh, np.maximum(F, 0.0), "V+"))


@dataclass
class SolveReport:
    """Diagnostics of one solve."""

    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    damping: float = math.nan
    sandwich_violation: float = 0.0
    wall_time: float = 0.0
    method: str = "picard"
    label: str = "exact"

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else math.nan

    def to_dict(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations,
                "residual": self.residual, "damping": self.damping,
                "sandwich_violation": self.sandwich_violation, "wall_time": self.wall_time,
                "method": self.method, "label": self.label,
                "residual_history": list(self.residual_history)}


def truncate_h(g: Nonlinearity, v, env: TruncationEnvelope) -> GridFunction:
    """``h(v) = g(min(max(v, V-), V+))``, the truncated absorption."""
    vals = v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)
    return GridFunction(env.upper.mesh, g(np.clip(vals, env.lower.values, env.upper.values)), "h(v)")


# --------------------------------------------------------------------------
# gate and helpers
# --------------------------------------------------------------------------

def criticality_gate(g: Nonlinearity, spec, mu: RadonMeasure | None = None):
    """Refuse atom data when ``g`` fails the subcritical integral condition.

    Returns the :class:`~nlgreen.spaces.SubcriticalResult`.

    Raises
    ------
    GoodMeasureError
        If ``mu`` has atoms and ``int_1^inf [g(t) - g(-t)] t^{-1-p*} dt``
        diverges (for powers: ``p >= p*``).
    """
    ps = p_star(spec.N, spec.s, spec.gamma)
    res = subcritical_check(g, ps)
    if mu is not None and mu.has_atoms and not res.subcritical:
        raise GoodMeasureError(
            f"g = {g!r} is not subcritical for p* = {ps:.6g}: g(G[mu+]) is not integrable against "
            "delta^gamma for Dirac data, so no weak-dual solution exists")
    return res


def _forcing(op, mu, forcing):
    if forcing is not None:
        if mu is not None:
            raise ValueError("give either a measure or an affine forcing, not both")
        F = np.asarray(forcing, dtype=float).reshape(-1)
        if F.size != op.n or not np.all(np.isfinite(F)):
            raise ValueError("forcing must be finite with one value per node")
        return F, TruncationEnvelope.from_forcing(op.mesh, F)
    return op.apply_measure(mu).values, TruncationEnvelope.from_measure(op, mu)


def _residual(op, g, u, F):
    return l1_weighted(op.mesh, u + op.A @ g(u) - F, op.spec.gamma)


def _envelope_finite(g, env):
    for V in (env.lower.values, env.upper.values):
        with np.errstate(over="ignore", invalid="ignore"):
            gv = g(V)
        if not np.all(np.isfinite(gv)):
            raise GoodMeasureError("g is not finite on the truncation envelope")


def _sandwich(u, env):
    return float(max(0.0, np.max(env.lower.values - u), np.max(u - env.upper.values)))


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------

def picard_solve(op: DiscreteGreenOperator, g: Nonlinearity, mu: RadonMeasure | None = None,
                 cfg: SolverConfig | None = None, *, u0=None, forcing=None,
                 gate: bool = False) -> tuple[GridFunction, SolveReport]:
    """Damped iteration ``u <- (1 - theta) u + theta (F - G[h(u)])``.

    Parameters
    ----------
    op : DiscreteGreenOperator
    g : Nonlinearity
    mu : RadonMeasure, optional
        Datum; ``F = G[mu]``.
    cfg : SolverConfig, optional
    u0 : array_like, optional
        Initial iterate (default ``0``).
    forcing : array_like, optional
        Affine term ``F`` given directly at the nodes instead of ``mu``.
    gate : bool
        Apply :func:`criticality_gate` to atom data.  Off by default: on a
        mesh the envelope is always finite, and the CLI enables the gate.

    Returns
    -------
    u : GridFunction
    report : SolveReport

    Raises
    ------
    GoodMeasureError
        ``g`` infinite on the envelope, or (with ``gate``) supercritical
        ``g`` with atoms.
    DivergenceError
        ``max_iter`` exhausted or damping underflow; ``.history`` holds the
        residual curve.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if gate and mu is not None:
        criticality_gate(g, op.spec, mu)
    F, env = _forcing(op, mu, forcing)
    _envelope_finite(g, env)
    lo, hi = env.lower.values, env.upper.values
    u = np.zeros(op.n) if u0 is None else np.array(u0, dtype=float).reshape(-1)
    res = _residual(op, g, u, F)
    hist = [res]
    theta = cap = cfg.damping
    it = streak = 0
    since_raise = RECOVER_AFTER + 1
    while res > cfg.tol:
        if it >= cfg.max_iter or theta < cfg.min_damping:
            why = "max_iter exceeded" if it >= cfg.max_iter else "damping underflow"
            raise DivergenceError(f"Picard iteration failed ({why}); residual {res:.3e}", hist)
        T = F - op.A @ g(np.clip(u, lo, hi))
        cand = (1.0 - theta) * u + theta * T
        r_new = _residual(op, g, cand, F)
        it += 1
        since_raise += 1
        if r_new > res:
            theta *= 0.5
            streak = 0
            if since_raise <= RECOVER_AFTER:    # the last doubling overshot: keep theta from now on
                cap = theta
            if r_new > 10.0 * res:              # reject a blow-up, keep mild growth
                hist.append(res)
                continue
        else:
            streak += 1
            if streak >= RECOVER_AFTER and theta < cap:   # stiffness far from the solution is transient
                theta, streak, since_raise = min(cap, 2.0 * theta), 0, 0
        u, res = cand, r_new
        hist.append(res)
    viol = _sandwich(u, env)
    rep = SolveReport(True, it, hist, theta, viol, time.perf_counter() - t0, "picard", op.backend.label)
    return GridFunction(op.mesh, u, "u"), rep


def monotone_solve(op: DiscreteGreenOperator, g: Nonlinearity, mu: RadonMeasure | None = None,
                   cfg: SolverConfig | None = None, *, forcing=None, gate: bool = False):
    """Two-sided monotone iteration from ``V-`` (upwards) and ``V+`` (downwards).

    With ``C = diag(c_i)``, ``c_i = max g'`` on ``[V-_i, V+_i]``, each step
    solves ``(I + A C) u_new = F - A (h(u) - C u)``.  Since ``A^{-1} + C`` is
    an M-matrix and ``C - h' >= 0`` the step map is order preserving, so the
    lower sequence increases and the upper one decreases.

    Returns
    -------
    u_low, u_high : GridFunction
    report : SolveReport
        ``method = "monotone"``; ``sandwich_violation`` holds the final gap
        ``||u_high - u_low||_{L^1(delta^gamma)}``.

    Raises
    ------
    MonotonicityError
        If an iterate moves against its expected direction by more than
        ``1e-10`` relative to the envelope size.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if gate and mu is not None:
        criticality_gate(g, op.spec, mu)
    F, env = _forcing(op, mu, forcing)
    _envelope_finite(g, env)
    lo, hi = env.lower.values, env.upper.values
    c = _nodal_lipschitz(g, lo, hi)
    A = op.A
    lu = linalg.lu_factor(np.eye(op.n) + A * c[None, :])
    scale = max(1.0, float(np.max(np.abs(np.r_[lo, hi]))))

    def step(u):
        return linalg.lu_solve(lu, F - A @ (g(np.clip(u, lo, hi)) - c * u))

    ul, uh = lo.copy(), hi.copy()
    hist = []
    gamma = op.spec.gamma
    for it in range(1, cfg.max_iter + 1):
        nl, nh = step(ul), step(uh)
        if np.min(nl - ul) < -1e-10 * scale or np.max(nh - uh) > 1e-10 * scale:
            raise MonotonicityError("monotone iterates moved the wrong way; kernel positivity is broken")
        ul, uh = nl, nh
        r = max(_residual(op, g, ul, F), _residual(op, g, uh, F))
        hist.append(r)
        if r <= cfg.tol:
            break
    else:
        raise DivergenceError(f"monotone iteration did not reach tol; residual {hist[-1]:.3e}", hist)
    gap = l1_weighted(op.mesh, uh - ul, gamma)
    rep = SolveReport(True, it, hist, math.nan, gap, time.perf_counter() - t0, "monotone",
                      op.backend.label)
    return GridFunction(op.mesh, ul, "u_low"), GridFunction(op.mesh, uh, "u_high"), rep


def _nodal_lipschitz(g, lo, hi, samples: int = 33) -> np.ndarray:
    if g.kind == "power":
        p = g.params["p"]
        if p < 1:
            raise NonlinearityError("monotone_solve needs a locally Lipschitz g (power p >= 1)")
        return p * np.maximum(np.abs(lo), np.abs(hi)) ** (p - 1)
    t = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, samples)[None, :]
    return np.max(g.derivative(t), axis=1) * (1 + 1e-12)


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------

def weak_dual_residual(op: DiscreteGreenOperator, u, g: Nonlinearity, mu: RadonMeasure | None,
                       xi_family, *, forcing=None, details: bool = False):
    """``max_xi |int u xi + int g(u) G[xi] - int G[xi] dmu| / scale``.

    The scale of each member is the sum of the absolute values of the three
    terms (``1`` when all vanish).  With ``forcing = F`` the last term is
    ``int F xi``.
    """
    mesh = op.mesh
    uv = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    w = mesh.weights
    gu = g(uv)
    out = []
    for xi in xi_family:
        xv = xi(op.spec, mesh.nodes) if isinstance(xi, TestFunction) else np.asarray(xi, dtype=float)
        Gxi = op.A @ xv
        t1 = float(uv * xv @ w)
        t2 = float(gu * Gxi @ w)
        if forcing is not None:
            t3 = float(np.asarray(forcing, dtype=float) * xv @ w)
        else:
            t3 = op.pair_with_measure(xv, mu)
        scale = abs(t1) + abs(t2) + abs(t3)
        out.append(abs(t1 + t2 - t3) / scale if scale > 0 else 0.0)
    worst = max(out) if out else 0.0
    return {"max": worst, "members": out} if details else worst


@dataclass(frozen=True)
class KatoReport:
    """Slacks ``rhs - lhs`` (nonnegative when an inequality holds) and a common scale.

    ``abs`` and ``main`` use ``u = G[f]``; ``main2`` and ``abs2`` use
    ``u = G[f] + G[mu]``.  The measure term of ``abs2`` is
    ``int G[xi] d|mu|``.
    """

    abs: float
    main: float
    main2: float
    abs2: float
    scale: float
    tol: float = 1e-8

    def slacks(self) -> dict:
        return {"kato_abs": self.abs, "kato_main": self.main,
                "kato_main2": self.main2, "kato_abs2": self.abs2}

    @property
    def passed(self) -> bool:
        return min(self.slacks().values()) >= -self.tol * self.scale

    def to_dict(self) -> dict:
        return {**self.slacks(), "scale": self.scale, "tol": self.tol, "passed": self.passed}


def _xi_values(op, xi):
    return xi(op.spec, op.mesh.nodes) if isinstance(xi, TestFunction) else np.asarray(xi, dtype=float)


def _check_xi(op, xv, mu=None):
    Gxi = op.A @ xv
    bad = Gxi.min() < -1e-14 * max(1.0, float(np.abs(Gxi).max()))
    at = op.eval_at(mu.locations, xv) if (mu is not None and mu.n_atoms) else np.zeros(0)
    if bad or (at.size and at.min() < 0):
        raise InvalidTestFunctionError("test function must satisfy G[xi] >= 0")
    return Gxi, at


def kato_check(op: DiscreteGreenOperator, f, mu: RadonMeasure | None, xi, tol: float = 1e-8) -> KatoReport:
    """Evaluate the four Kato inequalities for ``u = G[f] (+ G[mu])``.

    ``sgn(0) = 0`` and ``sgn+(t) = 1`` for ``t > 0`` only.

    Raises
    ------
    InvalidTestFunctionError
        If ``G[xi]`` is negative at a node or at an atom of ``mu``.
    """
    w = op.mesh.weights
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    xv = _xi_values(op, xi)
    Gxi, at = _check_xi(op, xv, mu)
    uf = op.A @ fv
    um = uf.copy()
    mplus = mabs = 0.0
    if mu is not None:
        um = uf + op.apply_measure(mu).values
        if mu.n_atoms:
            mplus += float(np.maximum(mu.masses, 0) @ at)
            mabs += float(np.abs(mu.masses) @ at)
        if mu.density is not None:
            d = mu.density.values
            mplus += float(np.maximum(d, 0) * Gxi @ w)
            mabs += float(np.abs(d) * Gxi @ w)

    def pair(a, b):
        return float(a * b @ w)
    s_abs = pair(np.sign(uf) * fv, Gxi) - pair(np.abs(uf), xv)
    s_main = pair((uf > 0) * fv, Gxi) - pair(np.maximum(uf, 0), xv)
    s_main2 = pair((um > 0) * fv, Gxi) + mplus - pair(np.maximum(um, 0), xv)
    s_abs2 = pair(np.sign(um) * fv, Gxi) + mabs - pair(np.abs(um), xv)
    scale = pair(np.abs(um) + np.abs(uf), np.abs(xv)) + pair(np.abs(fv), np.abs(Gxi)) + mabs
    return KatoReport(s_abs, s_main, s_main2, s_abs2, scale if scale > 0 else 1.0, tol)


@dataclass(frozen=True)
class ConvexProfile:
    """Convex ``p`` with ``p(0) = p'(0) = 0`` and ``|p'| <= 1``."""

    fun: object
    dfun: object
    name: str = "p"

    def __post_init__(self):
        t = np.concatenate([-np.logspace(3, -8, 400), [0.0], np.logspace(-8, 3, 400)])
        v, dv = self.fun(t), self.dfun(t)
        if abs(float(self.fun(np.array([0.0]))[0])) > 0 or abs(float(self.dfun(np.array([0.0]))[0])) > 0:
            raise NonlinearityError("convex profile needs p(0) = p'(0) = 0")
        if np.any(np.abs(dv) > 1 + 1e-12):
            raise NonlinearityError("convex profile needs |p'| <= 1")
        if np.any(np.diff(dv) < -1e-12):
            raise NonlinearityError("convex profile needs nondecreasing p'")
        if np.any(v < -1e-15):
            raise NonlinearityError("convex profile with p(0) = p'(0) = 0 must be nonnegative")

    @classmethod
    def pk(cls, k: float) -> "ConvexProfile":
        """``p_k(t) = k t^2 / 2`` for ``|t| < 1/k``, else ``|t| - 1/(2k)``."""
        k = float(k)
        if not k > 0:
            raise ValueError("k must be positive")

        def f(t):
            t = np.asarray(t, dtype=float)
            a = np.abs(t)
            return np.where(a < 1.0 / k, 0.5 * k * t * t, a - 0.5 / k)

        def df(t):
            return np.clip(k * np.asarray(t, dtype=float), -1.0, 1.0)
        return cls(f, df, f"p_{k:g}")


def convex_kato_check(op: DiscreteGreenOperator, f, p: ConvexProfile, xi) -> dict:
    """Slack ``int f p'(u) G[xi] - int p(u) xi`` for ``u = G[f]``.

    Returns
    -------
    dict
        ``lhs``, ``rhs``, ``slack`` and ``scale``.
    """
    w = op.mesh.weights
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    xv = _xi_values(op, xi)
    Gxi, _ = _check_xi(op, xv)
    u = op.A @ fv
    lhs = float(p.fun(u) * xv @ w)
    rhs = float(fv * p.dfun(u) * Gxi @ w)
    scale = float(np.abs(p.fun(u) * xv) @ w + np.abs(fv * Gxi) @ w) or 1.0
    return {"profile": p.name, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "scale": scale}


def _ordered(mu1: RadonMeasure, mu2: RadonMeasure, mesh) -> bool:
    d = (mu2 - mu1).merged()
    if np.any(d.masses < 0):
        return False
    if d.density is not None and np.any(d.density.values < 0):
        return False
    return True


def comparison_test(op: DiscreteGreenOperator, g: Nonlinearity, mu1: RadonMeasure, mu2: RadonMeasure,
                    cfg: SolverConfig | None = None, atol: float = 1e-8) -> dict:
    """Solve for ``mu1 <= mu2`` and check ``u1 <= u2 + atol`` nodewise.

    Raises
    ------
    OrderingError
        If ``mu1 <= mu2`` cannot be verified atom- and nodewise.
    """
    if not _ordered(mu1, mu2, op.mesh):
        raise OrderingError("data are not ordered: mu2 - mu1 has a negative part")
    u1, r1 = picard_solve(op, g, mu1, cfg)
    u2, r2 = picard_solve(op, g, mu2, cfg)
    excess = float(np.max(u1.values - u2.values))
    return {"passed": excess <= atol, "max_excess": excess, "u1": u1, "u2": u2,
            "reports": (r1, r2)}
