"""Geometry of the ball ``B_R`` and its quadrature meshes.

Only the interval (N = 1) and the disk (N = 2) are meshed.  Nodes are cell
centroids and weights are exact cell volumes, so the weights are positive
and sum to the volume of the ball up to roundoff.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

#: Nodes closer to the boundary than ``LAYER_FRACTION * R`` form the boundary layer.
LAYER_FRACTION = 0.1


@dataclass(frozen=True)
class DomainSpec:
    """Ball ``B_R`` in dimension ``N`` with kernel exponents ``s`` and ``gamma``.

    Parameters
    ----------
    N : int
        Space dimension.  Must satisfy ``N > 2 s``.
    s : float
        Order of the operator, ``0 < s < 1``.
    gamma : float
        Boundary exponent of the kernel estimate, ``0 < gamma <= 1``.
    R : float
        Radius of the ball.
    """

    N: int
    s: float
    gamma: float
    R: float = 1.0

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.N!r}")
        if not 0.0 < self.s < 1.0:
            raise DomainError(f"order s must lie in (0, 1), got {self.s}")
        if not 0.0 < self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.R > 0.0:
            raise DomainError(f"radius must be positive, got {self.R}")
        if not self.N > 2.0 * self.s:
            raise DomainError(f"need N > 2s, got N={self.N}, s={self.s}")

    @property
    def volume(self) -> float:
        """Lebesgue measure of ``B_R``."""
        n = self.N
        return math.pi ** (n / 2) * self.R ** n / math.gamma(n / 2 + 1)

    def points(self, x) -> np.ndarray:
        """Coerce ``x`` to an array of points with trailing axis ``N``.

        For ``N = 1`` scalars and 1-D arrays are read as lists of abscissae.
        """
        a = np.asarray(x, dtype=float)
        if self.N == 1:
            if a.ndim == 0 or a.shape[-1] != 1:
                a = a[..., None]
        elif a.ndim == 0 or a.shape[-1] != self.N:
            raise DomainError(f"points must have trailing dimension {self.N}, got shape {a.shape}")
        return a

    def delta(self, x) -> np.ndarray:
        """Signed boundary distance ``R - |x|`` (negative outside the ball)."""
        p = self.points(x)
        return self.R - np.linalg.norm(p, axis=-1)

    def to_dict(self) -> dict:
        return {"N": int(self.N), "s": float(self.s), "gamma": float(self.gamma), "R": float(self.R)}


def distance_to_boundary(spec: DomainSpec, x) -> np.ndarray | float:
    """Return ``delta(x) = R - |x|``.

    Raises
    ------
    DomainError
        If any point lies outside the open ball.
    """
    d = spec.delta(x)
    if np.any(d <= 0.0):
        raise DomainError("point outside the open ball (delta <= 0)")
    return float(d) if np.ndim(d) == 0 else d


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Quadrature mesh of ``B_R``.

    Attributes
    ----------
    spec : DomainSpec
    nodes : ndarray, shape (n, N)
        Cell centroids.
    weights : ndarray, shape (n,)
        Cell volumes.
    delta : ndarray, shape (n,)
        ``R - |node|``.
    diameters : ndarray, shape (n,)
        Cell diameters.
    layer : ndarray of bool, shape (n,)
        Boundary-layer flag (``delta < LAYER_FRACTION * R``).
    resolution, grading
        Construction parameters.
    """

    spec: DomainSpec
    nodes: np.ndarray
    weights: np.ndarray
    delta: np.ndarray
    diameters: np.ndarray
    layer: np.ndarray
    resolution: int
    grading: float
    _hash: str = field(default="", repr=False)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def cell_radius(self) -> np.ndarray:
        return 0.5 * self.diameters

    @property
    def x(self) -> np.ndarray:
        """Node abscissae for ``N = 1`` (shape ``(n,)``)."""
        return self.nodes[:, 0]

    @property
    def hash(self) -> str:
        """SHA-256 of the node and weight bytes (identifies the mesh)."""
        return self._hash

    def integrate(self, values) -> float:
        """Midpoint quadrature ``sum_i values_i w_i``."""
        v = np.asarray(values, dtype=float)
        return float(v @ self.weights)

    def layer_refinement_ratio(self) -> float:
        """Largest boundary-layer diameter over largest diameter overall."""
        if not np.any(self.layer):
            return 0.0
        return float(self.diameters[self.layer].max() / self.diameters.max())

    def to_json(self) -> str:
        """Serialize as ``{"nodes": ..., "weights": ..., "delta": ...}``."""
        nodes = self.nodes[:, 0].tolist() if self.spec.N == 1 else self.nodes.tolist()
        return json.dumps({"nodes": nodes, "weights": self.weights.tolist(),
                           "delta": self.delta.tolist()})


def _graded_edges(R, m, q):
    # r_k = R (1 - (1 - k/m)^q), k = 0..m: spacing ~ delta^{1 - 1/q} near r = R
    t = np.arange(m + 1) / m
    e = R * (1.0 - (1.0 - t) ** q)
    e[-1] = R
    return e


def _interval(spec, n, q):
    half = _graded_edges(spec.R, n // 2, q) if n % 2 == 0 else None
    if half is not None:
        edges = np.concatenate([-half[::-1], half[1:]])
    else:
        # odd count: map a uniform grid of [-1, 1] symmetrically
        t = np.linspace(-1.0, 1.0, n + 1)
        edges = np.sign(t) * spec.R * (1.0 - (1.0 - np.abs(t)) ** q)
        edges[0], edges[-1] = -spec.R, spec.R
    nodes = 0.5 * (edges[1:] + edges[:-1])
    w = np.diff(edges)
    return nodes[:, None], w, w.copy()


def _disk(spec, m, q):
    R = spec.R
    e = _graded_edges(R, m, q)
    pts, ws, diams = [np.zeros((1, 2))], [np.array([math.pi * e[1] ** 2])], [np.array([2 * e[1]])]
    for k in range(1, m):
        r0, r1 = e[k], e[k + 1]
        dr = r1 - r0
        rm = 0.5 * (r0 + r1)
        # near-isotropic cells: tangential size ~ radial size.  Elongated cells
        # make the midpoint rule overshoot the singular kernel for neighbours.
        nt = max(6, int(math.ceil(2 * math.pi * rm / dr)))
        dth = 2 * math.pi / nt
        th = (np.arange(nt) + 0.5 * (k % 2)) * dth
        rc = (2.0 / 3.0) * (r1 ** 3 - r0 ** 3) / (r1 ** 2 - r0 ** 2) * math.sin(dth / 2) / (dth / 2)
        pts.append(np.column_stack([rc * np.cos(th), rc * np.sin(th)]))
        ws.append(np.full(nt, 0.5 * (r1 ** 2 - r0 ** 2) * dth))
        diams.append(np.full(nt, math.hypot(dr, r1 * dth)))
    return np.vstack(pts), np.concatenate(ws), np.concatenate(diams)


def build_mesh(spec: DomainSpec, resolution: int, boundary_grading: float = 2.0) -> Mesh:
    """Build a boundary-graded midpoint mesh of ``B_R``.

    Parameters
    ----------
    spec : DomainSpec
    resolution : int
        Number of cells across the interval (``N = 1``) or number of radial
        rings (``N = 2``).  At least 4.
    boundary_grading : float
        Exponent ``q >= 1``; cell size behaves like ``delta^{1 - 1/q}`` near
        the boundary.

    Returns
    -------
    Mesh
    """
    if spec.N not in (1, 2):
        raise DomainError(f"only N = 1, 2 are meshed, got N = {spec.N}")
    if int(resolution) != resolution or resolution < 4:
        raise DomainError(f"resolution must be an integer >= 4, got {resolution}")
    if not boundary_grading >= 1.0:
        raise DomainError(f"boundary grading must be >= 1, got {boundary_grading}")
    resolution = int(resolution)
    if spec.N == 1:
        nodes, w, d = _interval(spec, resolution, float(boundary_grading))
    else:
        nodes, w, d = _disk(spec, resolution, float(boundary_grading))
    delta = spec.R - np.linalg.norm(nodes, axis=1)
    layer = delta < LAYER_FRACTION * spec.R
    layer.setflags(write=False)
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(nodes).tobytes())
    h.update(np.ascontiguousarray(w).tobytes())
    return Mesh(spec=spec, nodes=_frozen(nodes), weights=_frozen(w), delta=_frozen(delta),
                diameters=_frozen(d), layer=layer,
                resolution=resolution, grading=float(boundary_grading), _hash=h.hexdigest()[:16])
