"""Mesh-free reference quadrature for ``G[phi](y) = int G(y, x) phi(x) dx``.

These routines are deliberately independent of the assembled operator and
serve as oracles for it.

* ``N = 1``: adaptive QUADPACK on each side of ``y`` in the variable
  ``t = |x - y|^{2s}``, which removes the diagonal singularity.
* ``N = 2``: polar coordinates centred at ``y``.  In the radial variable
  ``t = r^{2s}`` the integrand is bounded at ``r = 0``; a cubic map clusters
  Gauss-Legendre nodes at the boundary end of each ray and the angle is
  integrated with the periodic trapezoid rule.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .kernels import KernelBackend


def _ray_length(R, y, e):
    # distance from y to the sphere |x| = R along unit directions e
    ye = e @ y
    return -ye + np.sqrt(R * R - y @ y + ye * ye)


def green_apply_reference(backend: KernelBackend, phi, y, *, rel: float = 1e-10,
                          n_angle: int = 128, n_radial: int = 96, focus=None,
                          levels: int = 20, order: int = 12) -> float:
    """Reference value of ``int_Omega G(y, x) phi(x) dx``.

    Parameters
    ----------
    backend : KernelBackend
    phi : callable
        Vectorized integrand factor; receives abscissae (``N = 1``) or an
        ``(m, 2)`` array of points (``N = 2``).
    y : float or array_like
        Evaluation point inside the ball.
    focus : array_like, optional
        ``N = 2`` only: a boundary point where ``phi`` is singular (e.g. the
        pole of a Martin kernel).  The angle and the radial variable are then
        split into a half-disk about ``focus`` (polar coordinates centred
        there) and the rest (polar about ``y`` with that disk cut out of each
        ray); every variable gets ``levels`` geometrically graded panels
        towards its singular ends, each with an ``order``-point Gauss rule.
    """
    sp = backend.spec
    if sp.N == 1:
        return _reference_1d(backend, phi, float(np.ravel(y)[0]), rel)
    y = np.asarray(y, dtype=float).reshape(2)
    if focus is not None:
        return _reference_2d_graded(backend, phi, y, np.asarray(focus, dtype=float).reshape(2), levels, order)
    return _reference_2d(backend, phi, y, n_angle, n_radial)


def _reference_1d(backend, phi, y, rel):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _reference_1d_impl(backend, phi, y, rel)


def _reference_1d_impl(backend, phi, y, rel):
    # on each side x = y +- t^{1/(2s)}: the Jacobian cancels |x - y|^{2s-1}
    sp = backend.spec
    R, k = sp.R, 1.0 / (2 * sp.s)
    total = 0.0
    for side in (-1.0, 1.0):
        L = R - side * y

        def f(t, side=side):
            if t <= 0.0:
                t = 1e-300
            r = t ** k
            x = y + side * r
            G = float(backend._green(np.array([[y]]), np.array([[x]]))[0])
            return G * float(phi(np.array([x]))[0]) * k * t ** (k - 1.0)
        T = L ** (2 * sp.s)
        total += integrate.quad(f, 0.0, T, epsabs=0, epsrel=rel, limit=400)[0]
    return total


def _reference_2d(backend, phi, y, n_angle, n_radial):
    sp = backend.spec
    s, R = sp.s, sp.R
    th = 2 * math.pi * (np.arange(n_angle) + 0.5) / n_angle
    e = np.column_stack([np.cos(th), np.sin(th)])
    rho = _ray_length(R, y, e)                               # (A,)
    v, wv = np.polynomial.legendre.leggauss(n_radial)
    v, wv = 0.5 * (v + 1), 0.5 * wv
    T = rho ** (2 * s)                                       # t range per ray
    u = 1.0 - (1.0 - v) ** 3                                 # cluster at the boundary end
    du = 3.0 * (1.0 - v) ** 2
    t = T[:, None] * u[None, :]
    r = t ** (1.0 / (2 * s))
    pts = y[None, None, :] + r[..., None] * e[:, None, :]
    G = backend._green(np.broadcast_to(y, pts.shape), pts)
    # dx = r dr dtheta, dr = t^{1/(2s) - 1} / (2s) dt
    jac = r * t ** (1.0 / (2 * s) - 1.0) / (2 * s)
    f = G * jac * phi(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    radial = (f * (du * wv)[None, :]).sum(axis=1) * T
    return float(radial.sum() * 2 * math.pi / n_angle)


def _graded_panels(a, b, levels, ratio=0.5):
    # breakpoints between a and b, geometrically refined towards b
    k = np.arange(levels + 1)
    return np.concatenate([a + (b - a) * (1.0 - ratio ** k), [b]])


def _composite_gauss(breaks, order):
    v, wv = np.polynomial.legendre.leggauss(order)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    x = 0.5 * (hi - lo) * v[None, :] + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * wv[None, :]
    return x.ravel(), w.ravel()


def _graded_both(a, b, levels, order, ratio=0.5):
    # composite Gauss on [a, b], graded towards both ends
    m = 0.5 * (a + b)
    x1, w1 = _composite_gauss(_graded_panels(m, a, levels, ratio), order)
    x2, w2 = _composite_gauss(_graded_panels(m, b, levels, ratio), order)
    return np.concatenate([x1, x2]), np.abs(np.concatenate([w1, w2]))


def _graded_angles(breaks, levels, order):
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            x, w = _graded_both(lo, hi, levels, order)
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _integrand(backend, phi, y, pts):
    R = backend.spec.R
    inside = np.linalg.norm(pts, axis=-1) < R                  # roundoff can put ends on the sphere
    f = np.zeros(pts.shape[:-1])
    if inside.any():
        G = backend._green(np.broadcast_to(y, pts.shape)[inside], pts[inside])
        f[inside] = G * phi(pts[inside])
    return f


def _reference_2d_graded(backend, phi, y, focus, levels, order):
    """Two-centre rule: the half-disk ``B(focus, c/2)`` (``c = |y - focus|``) in
    polar coordinates about ``focus``, the rest in polar coordinates about
    ``y`` with that disk cut out of every ray."""
    sp = backend.spec
    s, R = sp.s, sp.R
    v = focus - y
    c = float(np.linalg.norm(v))
    a = 0.5 * c
    th0 = math.atan2(v[1], v[0])
    tang = math.asin(a / c)
    total = 0.0

    # part 1: rays from y; breakpoints at the tangents to the excised disk
    th, wth = _graded_angles(np.array([th0 - math.pi, th0 - tang, th0, th0 + tang, th0 + math.pi]),
                             levels, order)
    e = np.column_stack([np.cos(th), np.sin(th)])
    rho = _ray_length(R, y, e)
    pe = e @ v
    disc = a * a - (c * c - pe * pe)
    hit = (disc > 0) & (pe > 0)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    r1 = np.where(hit, np.minimum(pe - sq, rho), rho)
    r2 = np.where(hit, np.minimum(pe + sq, rho), rho)
    # [0, r1] in t = r^{2s}; [r2, rho] graded towards the sphere
    u, wu = _graded_both(0.0, 1.0, levels, order)             # kernel scale delta(y) near 0, sphere at 1
    T = r1 ** (2 * s)
    t = T[:, None] * u[None, :]
    r = t ** (1.0 / (2 * s))
    jac = r * t ** (1.0 / (2 * s) - 1.0) / (2 * s)
    f = _integrand(backend, phi, y, y + r[..., None] * e[:, None, :])
    total += float(((f * jac * wu[None, :]).sum(axis=1) * T) @ wth)
    L = rho - r2
    ok = L > 0
    if ok.any():
        r = r2[ok, None] + L[ok, None] * u[None, :]
        f = _integrand(backend, phi, y, y + r[..., None] * e[ok, None, :])
        total += float(((f * r * wu[None, :]).sum(axis=1) * L[ok]) @ wth[ok])

    # part 2: polar about the focus, psi within 90 degrees of the inward normal
    nrm = math.atan2(-focus[1], -focus[0])
    chord_eq = math.acos(min(1.0, a / (2 * R)))                # chord 2R cos(psi - nrm) equals a
    ps, wps = _graded_angles(np.array([nrm - math.pi / 2, nrm - chord_eq, nrm + chord_eq, nrm + math.pi / 2]),
                             levels, order)
    ep = np.column_stack([np.cos(ps), np.sin(ps)])
    top = np.minimum(a, 2 * R * np.cos(ps - nrm))
    g, wg = _composite_gauss(_graded_panels(1.0, 0.0, levels), order)   # towards the focus
    g, wg = g, np.abs(wg)
    rr = top[:, None] * g[None, :]
    f = _integrand(backend, phi, y, focus[None, None, :] + rr[..., None] * ep[:, None, :])
    total += float(((f * rr * wg[None, :]).sum(axis=1) * top) @ wps)
    return total


def head_integral(spec, points, eps: float = math.inf, beta: float = 1.0, n_angle: int = 512) -> np.ndarray:
    """Exact ``int_{B_eps(x) cap Omega} |x - y|^{2s-N} (1 - (|x-y|/eps)^beta) dy``.

    With ``eps = inf`` the cutoff factor is dropped and the integral runs over
    all of ``Omega``.  Along each ray of length ``rho`` the radial integral is
    ``rho^{2s}/(2s) - rho^{2s+beta} / ((2s+beta) eps^beta)``.
    """
    s = spec.s
    P = spec.points(points).reshape(-1, spec.N)

    def radial(rho):
        if math.isinf(eps):
            return rho ** (2 * s) / (2 * s)
        rho = np.minimum(rho, eps)
        return rho ** (2 * s) / (2 * s) - rho ** (2 * s + beta) / ((2 * s + beta) * eps ** beta)

    if spec.N == 1:
        x = P[:, 0]
        return radial(spec.R - x) + radial(spec.R + x)
    th = 2 * math.pi * np.arange(n_angle) / n_angle
    e = np.column_stack([np.cos(th), np.sin(th)])
    pe = P @ e.T                                             # (n, A)
    rho = -pe + np.sqrt(spec.R ** 2 - np.sum(P * P, axis=1)[:, None] + pe * pe)
    return radial(rho).sum(axis=1) * (2 * math.pi / n_angle)


def head_moment(spec, points, n_angle: int = 512) -> np.ndarray:
    """Exact ``int_Omega (y - x) |y - x|^{2s-N} dy`` at each point ``x``, shape ``(m, N)``.

    Along a ray ``e`` of length ``rho`` the radial integral is
    ``e rho^{2s+1} / (2s+1)``.
    """
    s = spec.s
    P = spec.points(points).reshape(-1, spec.N)
    k = 2 * s + 1
    if spec.N == 1:
        x = P[:, 0]
        return (((spec.R - x) ** k - (spec.R + x) ** k) / k)[:, None]
    th = 2 * math.pi * np.arange(n_angle) / n_angle
    e = np.column_stack([np.cos(th), np.sin(th)])
    pe = P @ e.T
    rho = -pe + np.sqrt(spec.R ** 2 - np.sum(P * P, axis=1)[:, None] + pe * pe)
    return (rho ** k / k) @ e * (2 * math.pi / n_angle)


def near_field_integral(backend: KernelBackend, split, y, window, rel: float = 1e-10) -> float:
    """``int_K H_eps(x, y) dx`` for an interval window ``K = [a, b]`` (``N = 1``)
    or a disk window ``K = B_rho(0)`` (``N = 2``, ``window = rho``)."""
    sp = backend.spec
    eps = split.eps
    if sp.N == 1:
        y = float(np.ravel(y)[0])
        a, b = window

        def H(x):
            r = abs(x - y)
            G = float(backend._green(np.array([[x]]), np.array([[y]]))[0])
            return G * (1.0 - min(1.0, (r / eps) ** split.beta))
        total = 0.0
        for lo, hi in ((max(a, y - eps), min(b, y)), (max(a, y), min(b, y + eps))):
            if hi > lo:
                pts = [p for p in (y,) if lo < p < hi]
                total += integrate.quad(H, lo, hi, epsabs=0, epsrel=rel, limit=200, points=pts or None)[0]
        return total
    y = np.asarray(y, dtype=float).reshape(2)
    rho_w = float(window)

    def phi(p):
        r = np.linalg.norm(p - y, axis=1)
        inside = np.linalg.norm(p, axis=1) < rho_w
        return np.where(inside, 1.0 - np.minimum(1.0, (r / eps) ** split.beta), 0.0)
    return green_apply_reference(backend, phi, y, n_angle=256, n_radial=128)
