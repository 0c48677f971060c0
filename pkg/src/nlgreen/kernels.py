"""Green and Martin kernels, the two-sided envelope, and the regularized split.

Four backends are provided:

``RFL_BALL``
    Closed-form Green function of the restricted fractional Laplacian on a
    ball.  The inner integral ``int_0^{r0} t^{s-1} (1+t)^{-N/2} dt`` equals
    ``B(s, N/2 - s) I_{r0/(1+r0)}(s, N/2 - s)`` and is evaluated with the
    regularized incomplete beta function.
``SFL_INTERVAL``
    Spectral fractional Laplacian on ``(-R, R)``.  The eigen-expansion is
    summed exactly through the cosine polylogarithm
    ``C_sigma(theta) = sum_k k^{-sigma} cos(k theta)``, whose expansion near
    ``theta = 0`` converges geometrically on ``[0, pi]``.
``CFL_SURROGATE`` and ``ENVELOPE``
    ``c0 * E(x, y)`` with ``E`` the two-sided estimate shape.  The surrogate
    additionally enforces the censored-Laplacian exponents ``s > 1/2``,
    ``gamma = 2s - 1``.

Every backend exposes the singular coefficient ``lead`` with
``G(x, y) ~ lead |x - y|^{2s-N}`` as ``y -> x`` and the finite part
``regular_diag(x) = lim_{y -> x} [G(x, y) - lead |x - y|^{2s-N}]``; the
operator assembly uses both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .domain import DomainSpec
from .exceptions import (BoundaryPointError, DiagonalSingularityError, DomainError,
                         SplitParameterError)

RFL_BALL = "RFL_BALL"
SFL_INTERVAL = "SFL_INTERVAL"
CFL_SURROGATE = "CFL_SURROGATE"
ENVELOPE = "ENVELOPE"
VARIANTS = (RFL_BALL, SFL_INTERVAL, CFL_SURROGATE, ENVELOPE)


# --------------------------------------------------------------------------
# envelope shape
# --------------------------------------------------------------------------

def envelope_shape(spec: DomainSpec, x, y) -> np.ndarray:
    """``E(x,y) = r^{2s-N} (dx/r ^ 1)^gamma (dy/r ^ 1)^gamma`` with ``r = |x - y|``."""
    X, Y = spec.points(x), spec.points(y)
    r = np.linalg.norm(X - Y, axis=-1)
    dx, dy = spec.R - np.linalg.norm(X, axis=-1), spec.R - np.linalg.norm(Y, axis=-1)
    g = spec.gamma
    with np.errstate(divide="ignore"):
        return (r ** (2 * spec.s - spec.N) * np.minimum(dx / r, 1.0) ** g
                * np.minimum(dy / r, 1.0) ** g)


@dataclass(frozen=True)
class EnvelopeBounds:
    """Two-sided bounds ``c_low E <= G <= c_high E`` and the one-sided majorants.

    The majorants are, in order: ``r^{2s-N}``, ``(dy/dx)^gamma r^{2s-N}``,
    ``dy^gamma r^{2s-N-gamma}`` and ``dx^gamma dy^gamma r^{2s-N-2gamma}``.
    ``E`` is bounded by the first, third and fourth with constant one and by
    the second with constant ``2^gamma``.
    """

    lower: np.ndarray
    upper: np.ndarray
    shape: np.ndarray
    majorants: tuple


def envelope_bounds(spec: DomainSpec, x, y, c_low: float = 1.0, c_high: float = 1.0) -> EnvelopeBounds:
    """Evaluate ``c_low E``, ``c_high E`` and the four majorants at ``(x, y)``.

    Raises
    ------
    DiagonalSingularityError
        If ``x == y`` for some pair.
    """
    X, Y = _check_pair(spec, x, y)
    E = envelope_shape(spec, X, Y)
    r = np.linalg.norm(X - Y, axis=-1)
    dx, dy = spec.R - np.linalg.norm(X, axis=-1), spec.R - np.linalg.norm(Y, axis=-1)
    a, g = 2 * spec.s - spec.N, spec.gamma
    maj = (r ** a, (dy / dx) ** g * r ** a, dy ** g * r ** (a - g), dx ** g * dy ** g * r ** (a - 2 * g))
    return EnvelopeBounds(c_low * E, c_high * E, E, maj)


def _check_pair(spec, x, y):
    X, Y = spec.points(x), spec.points(y)
    if np.any(spec.delta(X) <= 0) or np.any(spec.delta(Y) <= 0):
        raise DomainError("kernel argument outside the open ball")
    if np.any(np.linalg.norm(X - Y, axis=-1) == 0.0):
        raise DiagonalSingularityError("kernel evaluated on the diagonal x == y")
    return X, Y


# --------------------------------------------------------------------------
# backends
# --------------------------------------------------------------------------

class KernelBackend:
    """Base class.  Subclasses implement ``_green``, ``_martin``, ``lead`` and ``regular_diag``."""

    variant = ""

    def __init__(self, spec: DomainSpec):
        self.spec = spec

    # public, checked -------------------------------------------------------
    def green(self, x, y) -> np.ndarray:
        """Kernel value ``G(x, y)``; broadcasts over leading axes."""
        X, Y = _check_pair(self.spec, x, y)
        return self._green(X, Y)

    def green_matrix(self, X, Y) -> np.ndarray:
        """Matrix ``G(X_i, Y_j)`` for point lists ``X`` (m, N) and ``Y`` (n, N)."""
        X, Y = self.spec.points(X), self.spec.points(Y)
        return self.green(X[:, None, :], Y[None, :, :])

    def martin(self, x, z) -> np.ndarray:
        """Martin kernel ``M(x, z) = lim_{y -> z} G(x, y) / delta(y)^gamma``."""
        X, Z = self.spec.points(x), self.spec.points(z)
        if np.any(self.spec.delta(X) <= 0):
            raise DomainError("Martin kernel argument outside the open ball")
        if not np.allclose(np.linalg.norm(Z, axis=-1), self.spec.R, rtol=1e-12, atol=0):
            raise BoundaryPointError("z must satisfy |z| = R")
        return self._martin(X, Z)

    def regular_diag(self, x) -> np.ndarray:
        """Finite part of ``G`` on the diagonal (see module docstring)."""
        raise NotImplementedError

    @property
    def lead(self) -> float:
        raise NotImplementedError

    @property
    def label(self) -> str:
        """``exact`` for true Green functions, ``estimate-class`` for surrogates."""
        return "exact"

    def to_dict(self) -> dict:
        return {"variant": self.variant, **self.spec.to_dict()}

    # unchecked hooks ---------------------------------------------------------
    def _green(self, X, Y):
        raise NotImplementedError

    def _martin(self, X, Z):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


def rfl_constant(N: int, s: float) -> float:
    """``kappa(N, s) = Gamma(N/2) / (4^s pi^{N/2} Gamma(s)^2)``."""
    return math.gamma(N / 2) / (4 ** s * math.pi ** (N / 2) * math.gamma(s) ** 2)


class RFLBall(KernelBackend):
    """Restricted fractional Laplacian on ``B_R`` (requires ``gamma = s``)."""

    variant = RFL_BALL

    def __init__(self, spec: DomainSpec):
        if not math.isclose(spec.gamma, spec.s, rel_tol=0, abs_tol=1e-14):
            raise DomainError(f"RFL requires gamma = s, got gamma={spec.gamma}, s={spec.s}")
        super().__init__(spec)
        N, s = spec.N, spec.s
        self.kappa = rfl_constant(N, s)
        self._b = N / 2 - s
        self._B = special.beta(s, self._b)

    @property
    def lead(self) -> float:
        return self.kappa * self._B

    def inner_integral(self, r0) -> np.ndarray:
        """``int_0^{r0} t^{s-1} (1+t)^{-N/2} dt`` via the incomplete beta function."""
        r0 = np.asarray(r0, dtype=float)
        return self._B * special.betainc(self.spec.s, self._b, r0 / (1.0 + r0))

    def _green(self, X, Y):
        R2 = self.spec.R ** 2
        r2 = np.sum((X - Y) ** 2, axis=-1)
        ax = R2 - np.sum(X * X, axis=-1)
        ay = R2 - np.sum(Y * Y, axis=-1)
        r0 = ax * ay / (R2 * r2)
        return self.kappa * r2 ** (self.spec.s - self.spec.N / 2) * self.inner_integral(r0)

    def regular_diag(self, x):
        X = self.spec.points(x)
        R2 = self.spec.R ** 2
        ax = R2 - np.sum(X * X, axis=-1)
        return -self.kappa / self._b * (ax * ax / R2) ** (-self._b)

    def _martin(self, X, Z):
        s, R = self.spec.s, self.spec.R
        ax = R * R - np.sum(X * X, axis=-1)
        r = np.linalg.norm(X - Z, axis=-1)
        return 2 ** s * self.kappa / s * ax ** s * R ** (-s) * r ** (-self.spec.N)


class _CosinePolylog:
    """``C(theta) = sum_{k>=1} k^{-sigma} cos(k theta)`` for ``0 < sigma < 1``.

    Near zero, ``C(theta) = Gamma(1-sigma) sin(pi sigma / 2) |theta|^{sigma-1}
    + sum_j zeta(sigma - 2j) (-1)^j theta^{2j} / (2j)!``; the series converges
    like ``(theta / 2 pi)^{2j}`` and is used on the reduced range ``[0, pi]``.
    """

    def __init__(self, sigma: float, terms: int = 48):
        self.sigma = sigma
        self.head = math.gamma(1 - sigma) * math.sin(math.pi * sigma / 2)
        j = np.arange(terms)
        self.coef = special.zeta(sigma - 2 * j) * (-1.0) ** j / special.factorial(2 * j)
        # derivative coefficients of theta^{2j}: 2j theta^{2j-1}
        self.dcoef = self.coef[1:] * (2 * j[1:])

    @staticmethod
    def reduce(theta):
        t = np.mod(np.abs(np.asarray(theta, dtype=float)), 2 * np.pi)   # C is even
        return np.where(t > np.pi, 2 * np.pi - t, t)

    def __call__(self, theta):
        t = self.reduce(theta)
        t2 = t * t
        smooth = np.polynomial.polynomial.polyval(t2, self.coef)
        with np.errstate(divide="ignore"):
            return self.head * t ** (self.sigma - 1) + smooth

    def smooth_at_zero(self) -> float:
        return float(self.coef[0])

    def deriv_positive(self, t):
        """``C'(t)`` for ``0 < t <= pi``."""
        t = np.asarray(t, dtype=float)
        t2 = t * t
        odd = t * np.polynomial.polynomial.polyval(t2, self.dcoef)
        return self.head * (self.sigma - 1) * t ** (self.sigma - 2) + odd


class SFLInterval(KernelBackend):
    """Spectral fractional Laplacian on ``(-R, R)`` (``N = 1``, ``gamma = 1``, ``s < 1/2``).

    Parameters
    ----------
    spec : DomainSpec
    K : int or None
        If given, the plain truncated eigen-expansion with ``K`` modes is used
        instead of the exact resummation (for spectral oracles).
    """

    variant = SFL_INTERVAL

    def __init__(self, spec: DomainSpec, K: int | None = None):
        if spec.N != 1 or spec.gamma != 1.0 or not spec.s < 0.5:
            raise DomainError("SFL backend needs N = 1, gamma = 1 and s < 1/2")
        super().__init__(spec)
        R, s = spec.R, spec.s
        self.K = None if K is None else int(K)
        self.poly = _CosinePolylog(2 * s)
        self.c = (1.0 / (2 * R)) * (2 * R / math.pi) ** (2 * s)

    @property
    def lead(self) -> float:
        s = self.spec.s
        return math.gamma(1 - 2 * s) * math.sin(math.pi * s) / math.pi

    def eigenvalues(self, k) -> np.ndarray:
        """Dirichlet Laplacian eigenvalues ``(k pi / 2R)^2``."""
        return (np.asarray(k, dtype=float) * math.pi / (2 * self.spec.R)) ** 2

    def eigenfunctions(self, k, x) -> np.ndarray:
        """Normalized ``phi_k(x) = R^{-1/2} sin(k pi (x + R) / 2R)``; shape ``(len(k), len(x))``."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        R = self.spec.R
        return np.sin(np.outer(k, x + R) * math.pi / (2 * R)) / math.sqrt(R)

    def _green(self, X, Y):
        x, y = X[..., 0], Y[..., 0]
        R = self.spec.R
        if self.K is not None:
            k = np.arange(1, self.K + 1, dtype=float)
            lam = self.eigenvalues(k) ** (-self.spec.s)
            px = np.sin(np.multiply.outer(x + R, k) * math.pi / (2 * R))
            py = np.sin(np.multiply.outer(y + R, k) * math.pi / (2 * R))
            return np.sum(px * py * lam, axis=-1) / R
        ta = math.pi * (x - y) / (2 * R)
        tb = math.pi * (x + y + 2 * R) / (2 * R)
        return self.c * (self.poly(ta) - self.poly(tb))

    def regular_diag(self, x):
        x = self.spec.points(x)[..., 0]
        R = self.spec.R
        return self.c * (self.poly.smooth_at_zero() - self.poly(math.pi * (x + R) / R))

    def _martin(self, X, Z):
        x, z = X[..., 0], Z[..., 0]
        R = self.spec.R
        xx = np.where(z > 0, x, -x)          # M(x, -R) = M(-x, R)
        t = np.abs(math.pi * (xx - R) / (2 * R))
        return -self.c * math.pi / R * self.poly.deriv_positive(t)

    def to_dict(self):
        return {**super().to_dict(), "K": self.K}


class EnvelopeKernel(KernelBackend):
    """``c0 * E(x, y)``: the two-sided estimate shape taken with equality."""

    variant = ENVELOPE

    def __init__(self, spec: DomainSpec, c0: float = 1.0):
        if not c0 > 0:
            raise DomainError(f"c0 must be positive, got {c0}")
        super().__init__(spec)
        self.c0 = float(c0)

    @property
    def lead(self) -> float:
        return self.c0

    @property
    def label(self) -> str:
        return "estimate-class"

    def _green(self, X, Y):
        return self.c0 * envelope_shape(self.spec, X, Y)

    def regular_diag(self, x):
        # c0 E - c0 r^{2s-N} vanishes once r < min(delta(x), delta(y))
        return np.zeros(np.shape(self.spec.points(x))[:-1])

    def _martin(self, X, Z):
        sp = self.spec
        d = sp.R - np.linalg.norm(X, axis=-1)
        r = np.linalg.norm(X - Z, axis=-1)
        return self.c0 * d ** sp.gamma * r ** (-(sp.N - 2 * sp.s + 2 * sp.gamma))

    def to_dict(self):
        return {**super().to_dict(), "c0": self.c0}


class CFLSurrogate(EnvelopeKernel):
    """Envelope kernel restricted to censored-Laplacian exponents (``s > 1/2``, ``gamma = 2s - 1``)."""

    variant = CFL_SURROGATE

    def __init__(self, spec: DomainSpec, c0: float = 1.0):
        if not spec.s > 0.5 or not math.isclose(spec.gamma, 2 * spec.s - 1, abs_tol=1e-14):
            raise DomainError("CFL surrogate needs s > 1/2 and gamma = 2s - 1")
        super().__init__(spec, c0)


_ALIASES = {"rfl": RFL_BALL, "sfl": SFL_INTERVAL, "cfl": CFL_SURROGATE, "envelope": ENVELOPE}


def make_backend(variant: str, spec: DomainSpec, **params) -> KernelBackend:
    """Construct a backend by variant name (``rfl``/``sfl``/``cfl``/``envelope`` accepted)."""
    v = _ALIASES.get(str(variant).lower(), str(variant).upper())
    if v == RFL_BALL:
        return RFLBall(spec)
    if v == SFL_INTERVAL:
        return SFLInterval(spec, K=params.get("K"))
    if v == CFL_SURROGATE:
        return CFLSurrogate(spec, c0=params.get("c0", 1.0))
    if v == ENVELOPE:
        return EnvelopeKernel(spec, c0=params.get("c0", 1.0))
    raise DomainError(f"unknown kernel variant {variant!r}")


def green_eval(backend: KernelBackend, x, y):
    """Functional form of :meth:`KernelBackend.green`."""
    return backend.green(x, y)


def martin_eval(backend: KernelBackend, x, z):
    """Functional form of :meth:`KernelBackend.martin`."""
    return backend.martin(x, z)


# --------------------------------------------------------------------------
# limits and bands
# --------------------------------------------------------------------------

def martin_limit(backend: KernelBackend, x, z, k0: int = 8, levels: int = 3) -> float:
    """Richardson-extrapolated ``lim G(x, y) / delta(y)^gamma`` along ``y = z (1 - 2^{-k})``.

    The quotient is smooth in ``delta(y)``, so two Richardson sweeps (removing
    the ``h`` and ``h^2`` terms) are applied to the sequence ``k0, ..., k0 + levels - 1``.
    """
    sp = backend.spec
    X = sp.points(x)
    Z = sp.points(z)
    vals = []
    for k in range(k0, k0 + levels):
        h = 2.0 ** (-k)
        Y = Z * (1.0 - h)
        vals.append(float(backend.green(X, Y)) / (sp.R * h) ** sp.gamma)
    t = np.array(vals)
    for order in range(1, levels):
        t = (2 ** order * t[1:] - t[:-1]) / (2 ** order - 1)
    return float(t[0])


def sample_points(spec: DomainSpec, n: int, seed: int = 0, boundary_bias: float = 3.0) -> np.ndarray:
    """Quasi-random points of ``B_R`` whose radii cluster at the boundary.

    ``|x| = R (1 - v^boundary_bias)`` with ``v`` from a scrambled Halton sequence.
    """
    eng = stats.qmc.Halton(d=spec.N, scramble=True, seed=seed)
    u = eng.random(n)
    v = u[:, 0]
    rad = spec.R * (1.0 - np.clip(v ** boundary_bias, 1e-12, 1.0))   # keep off the sphere
    if spec.N == 1:
        sign = np.where(np.mod(np.arange(n), 2) == 0, 1.0, -1.0)
        return (sign * rad)[:, None]
    th = 2 * np.pi * u[:, 1]
    return np.column_stack([rad * np.cos(th), rad * np.sin(th)])


def envelope_band(backend: KernelBackend, n_pairs: int = 10_000, seed: int = 0,
                  cutoff: float = 1e-3) -> tuple[float, float]:
    """Measured ``(c1, c2)`` with ``c1 <= G / E <= c2`` over quasi-random pairs.

    Pairs closer than ``cutoff`` are dropped (mesh-scale cutoff).
    """
    sp = backend.spec
    X = sample_points(sp, n_pairs, seed)
    Y = sample_points(sp, n_pairs, seed + 1)[np.random.default_rng(seed).permutation(n_pairs)]
    r = np.linalg.norm(X - Y, axis=-1)
    keep = r >= cutoff
    ratio = backend.green(X[keep], Y[keep]) / envelope_shape(sp, X[keep], Y[keep])
    return float(ratio.min()), float(ratio.max())


# --------------------------------------------------------------------------
# regularized split
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularizedSplit:
    """Cutoff ``K(t) = 1 ^ (t / eps)^beta``; build with :func:`make_split`."""

    eps: float
    beta: float

    def __post_init__(self):
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise SplitParameterError(f"eps must be positive, got {self.eps}")
        if not self.beta > 0:
            raise SplitParameterError(f"beta must be positive, got {self.beta}")

    def cutoff(self, t) -> np.ndarray:
        return np.minimum(1.0, (np.asarray(t, dtype=float) / self.eps) ** self.beta)

    def check(self, spec: DomainSpec) -> None:
        lo = split_threshold(spec)
        if not self.beta > lo:
            raise SplitParameterError(f"need beta > N - 2s + 2 gamma = {lo}, got {self.beta}")

    def to_dict(self) -> dict:
        return {"eps": float(self.eps), "beta": float(self.beta)}


def split_threshold(spec: DomainSpec) -> float:
    """``N - 2s + 2 gamma``, the lower bound for ``beta``."""
    return spec.N - 2 * spec.s + 2 * spec.gamma


def make_split(spec: DomainSpec, eps: float, beta: float | None = None) -> RegularizedSplit:
    """Validated split; ``beta`` defaults to ``N - 2s + 2 gamma + 1``."""
    b = split_threshold(spec) + 1.0 if beta is None else float(beta)
    sp = RegularizedSplit(float(eps), b)
    sp.check(spec)
    return sp


def kernel_split(backend: KernelBackend, split: RegularizedSplit, x, y):
    """Return ``(G_eps, H_eps)`` with ``G_eps = G K(|x - y|)`` and ``H_eps = G - G_eps``."""
    split.check(backend.spec)
    G = backend.green(x, y)
    X, Y = backend.spec.points(x), backend.spec.points(y)
    K = split.cutoff(np.linalg.norm(X - Y, axis=-1))
    Ge = G * K
    return Ge, G - Ge
