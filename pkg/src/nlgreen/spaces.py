"""Grid functions, weighted Lebesgue and Marcinkiewicz norms, critical exponents.

All integrals are midpoint sums ``sum_i v_i delta_i^alpha w_i`` over a
:class:`~nlgreen.domain.Mesh`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .domain import Mesh
from .exceptions import DomainError, MeshMismatchError, NonlinearityError
from .nonlinearity import POWER, Nonlinearity


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values on a mesh.

    Parameters
    ----------
    mesh : Mesh
    values : array_like, shape (n,)
        Finite node values.
    label : str, optional
    """

    mesh: Mesh
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.mesh.n:
            raise MeshMismatchError(f"{v.size} values for a mesh with {self.mesh.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, mesh: Mesh, fun, label: str = "") -> "GridFunction":
        """Sample ``fun(nodes)``; for ``N = 1`` the callable receives abscissae."""
        pts = mesh.x if mesh.spec.N == 1 else mesh.nodes
        return cls(mesh, np.broadcast_to(fun(pts), (mesh.n,)), label)

    def with_values(self, values, label: str | None = None) -> "GridFunction":
        return GridFunction(self.mesh, values, self.label if label is None else label)

    def same_mesh(self, other: "GridFunction") -> None:
        if other.mesh is not self.mesh and other.mesh.hash != self.mesh.hash:
            raise MeshMismatchError("grid functions live on different meshes")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size


def _vals(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def _weight(mesh: Mesh, alpha: float) -> np.ndarray:
    return mesh.delta ** alpha * mesh.weights


def lq_norm(u: GridFunction, q: float = 1.0, alpha: float = 0.0) -> float:
    """``(sum_i |u_i|^q delta_i^alpha w_i)^{1/q}``.

    Raises
    ------
    ValueError
        If ``q < 1``.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    v = np.abs(u.values)
    return float((v ** q @ _weight(u.mesh, alpha)) ** (1.0 / q))


def l1_weighted(mesh: Mesh, values, alpha: float) -> float:
    """``sum_i |v_i| delta_i^alpha w_i`` for raw node arrays."""
    return float(np.abs(np.asarray(values, dtype=float)) @ _weight(mesh, alpha))


def distribution_function(u: GridFunction, alpha: float = 0.0):
    """Superlevel masses of ``|u|``.

    Returns
    -------
    levels : ndarray
        Distinct values of ``|u|`` in decreasing order.
    masses : ndarray
        ``m(|u| >= level)`` measured with ``delta^alpha dx``.
    """
    v = np.abs(u.values)
    order = np.argsort(-v, kind="stable")
    cm = np.cumsum(_weight(u.mesh, alpha)[order])
    vs = v[order]
    last = np.r_[vs[1:] != vs[:-1], True]      # end of each tie block
    return vs[last], cm[last]


def marcinkiewicz_quasinorm(u: GridFunction, q: float, alpha: float = 0.0) -> float:
    """Weak-``L^q`` quasinorm ``sup_lambda lambda m(|u| > lambda)^{1/q}``.

    On a grid the supremum is attained as ``lambda`` increases to a node value
    ``v``, where the superlevel set is ``{|u| >= v}``.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    lev, mass = distribution_function(u, alpha)
    if lev.size == 0 or lev[0] == 0.0:
        return 0.0
    return float(np.max(lev * mass ** (1.0 / q)))


def marcinkiewicz_norm(u: GridFunction, q: float, alpha: float = 0.0, n_random: int = 100,
                       seed: int = 0, details: bool = False):
    """Weak-``L^q`` norm ``sup_A int_A |u| delta^alpha / (int_A delta^alpha)^{1 - 1/q}``.

    The supremum runs over every prefix of the nodes sorted by ``|u|`` (the
    superlevel sets, which realize the supremum) together with ``n_random``
    seeded Bernoulli node subsets that audit the claim.

    Returns
    -------
    float or dict
        The norm, or with ``details=True`` a dict with keys ``norm``,
        ``superlevel`` and ``random``.
    """
    if not q > 1:
        raise ValueError(f"q must be > 1, got {q}")
    v = np.abs(u.values)
    wt = _weight(u.mesh, alpha)
    order = np.argsort(-v, kind="stable")
    num = np.cumsum(v[order] * wt[order])
    den = np.cumsum(wt[order])
    sup_level = float(np.max(num / den ** (1.0 - 1.0 / q)))
    rng = np.random.default_rng(seed)
    sup_rand = 0.0
    for _ in range(n_random):
        mask = rng.random(v.size) < rng.uniform(0.02, 0.98)
        if not mask.any():
            continue
        sup_rand = max(sup_rand, float((v[mask] @ wt[mask]) / wt[mask].sum() ** (1.0 - 1.0 / q)))
    norm = max(sup_level, sup_rand)
    if details:
        return {"norm": norm, "superlevel": sup_level, "random": sup_rand}
    return norm


# --------------------------------------------------------------------------
# exponents
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentTable:
    """``p*_{beta,alpha}`` and ``p* = p*_{gamma,gamma}`` for one parameter set."""

    N: int
    s: float
    gamma: float
    beta: float
    alpha: float
    p_beta_alpha: float
    p_star: float

    @classmethod
    def build(cls, N, s, gamma, beta=None, alpha=None) -> "ExponentTable":
        beta = gamma if beta is None else beta
        alpha = gamma if alpha is None else alpha
        return cls(N, s, gamma, beta, alpha, critical_exponent(N, s, beta, alpha),
                   critical_exponent(N, s, gamma, gamma))


def critical_exponent(N: float, s: float, beta: float, alpha: float) -> float:
    """``p*_{beta,alpha} = (N + alpha) / (N + beta - 2s)``.

    Raises
    ------
    DomainError
        If ``beta < 0``, ``alpha < beta - 2s`` or the denominator is not positive.
    """
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    if alpha < beta - 2 * s:
        raise DomainError(f"need alpha >= beta - 2s, got alpha={alpha}, beta={beta}, s={s}")
    den = N + beta - 2 * s
    if not den > 0:
        raise DomainError(f"N + beta - 2s must be positive, got {den}")
    return (N + alpha) / den


def p_star(N: float, s: float, gamma: float) -> float:
    """Critical exponent ``(N + gamma) / (N + gamma - 2s)``."""
    return critical_exponent(N, s, gamma, gamma)


def admissible_range(N: float, s: float, gamma_prime: float) -> tuple[float, float]:
    """Weight exponents ``alpha`` admissible for ``gamma'``; empty when ``lo >= hi``."""
    if not 0 <= gamma_prime <= 1:
        raise DomainError(f"gamma' must lie in [0, 1], got {gamma_prime}")
    g = gamma_prime
    lo = max(-g - 1.0, g - 2 * s, -g * N / (N - 2 * s + g))
    hi = g * N / (N - 2 * s)
    return lo, hi


def is_admissible(N, s, gamma_prime, alpha) -> bool:
    lo, hi = admissible_range(N, s, gamma_prime)
    return lo < alpha < hi


@dataclass(frozen=True)
class SubcriticalResult:
    """Outcome of :func:`subcritical_check`."""

    subcritical: bool
    integral: float
    method: str
    decay_ratio: float = float("nan")


def subcritical_check(g: Nonlinearity, pstar: float, T_exp: int = 40) -> SubcriticalResult:
    """Test ``int_1^inf [g(t) - g(-t)] t^{-1-p*} dt < inf``.

    Odd powers use the closed form ``2 / (p* - p)``.  Otherwise the integral
    is accumulated over dyadic blocks ``[2^k, 2^{k+1}]`` up to ``2^T_exp``;
    the block increments are compared geometrically and the tail is
    extrapolated when they decay.
    """
    t = np.concatenate([-np.logspace(3, -3, 200), [0.0], np.logspace(-3, 3, 200)])
    v = g(t)
    if abs(float(g(0.0))) > 1e-14 or np.any(np.diff(v) < -1e-12 * (1 + np.abs(v[1:]))):
        raise NonlinearityError("subcritical check needs nondecreasing g with g(0) = 0")
    if g.kind == POWER:
        p = g.params["p"]
        if p < pstar:
            return SubcriticalResult(True, 2.0 / (pstar - p), "closed-form")
        return SubcriticalResult(False, math.inf, "closed-form", 1.0)

    def f(x):
        return (float(g(x)) - float(g(-x))) * x ** (-1.0 - pstar)
    inc = np.array([integrate.quad(f, 2.0 ** k, 2.0 ** (k + 1), limit=100)[0] for k in range(T_exp)])
    total = float(inc.sum())
    tail = inc[-10:]
    if np.all(tail <= 1e-300):
        return SubcriticalResult(True, total, "dyadic", 0.0)
    rho = float(np.exp(np.mean(np.diff(np.log(np.maximum(tail, 1e-300))))))
    if rho < 1.0 - 1e-6:
        return SubcriticalResult(True, total + inc[-1] * rho / (1.0 - rho), "dyadic", rho)
    return SubcriticalResult(False, math.inf, "dyadic", rho)
