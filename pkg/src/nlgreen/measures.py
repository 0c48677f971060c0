"""Radon measures: finitely many Dirac atoms plus a mesh density.

Atoms stay symbolic, so the Green operator acts on them through exact kernel
values ``G(x, y_k)`` and never through a projection onto the mesh.
"""
from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, Mesh
from .exceptions import ConfigError, DomainError, MeshMismatchError, MollifierSupportError
from .spaces import GridFunction


@dataclass(frozen=True, eq=False)
class RadonMeasure:
    """``mu = sum_k w_k delta_{y_k} + f dx``.

    Parameters
    ----------
    spec : DomainSpec
    locations : ndarray, shape (k, N)
        Atom locations, strictly inside the ball.
    masses : ndarray, shape (k,)
        Signed atom weights.
    density : GridFunction or None
        Absolutely continuous part.
    """

    spec: DomainSpec
    locations: np.ndarray
    masses: np.ndarray
    density: GridFunction | None = None

    def __post_init__(self):
        loc = np.array(self.spec.points(self.locations), dtype=float).reshape(-1, self.spec.N)
        m = np.array(self.masses, dtype=float).reshape(-1)
        if loc.shape[0] != m.size:
            raise ValueError("one mass per atom location is required")
        if np.any(self.spec.delta(loc) <= 0):
            raise DomainError("atom locations must lie strictly inside the ball")
        if not np.all(np.isfinite(m)):
            raise ValueError("atom masses must be finite")
        if self.density is not None and self.density.mesh.spec != self.spec:
            raise MeshMismatchError("density mesh belongs to a different domain")
        loc.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", m)

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, spec: DomainSpec) -> "RadonMeasure":
        return cls(spec, np.zeros((0, spec.N)), np.zeros(0))

    @classmethod
    def dirac(cls, spec: DomainSpec, x, weight: float = 1.0) -> "RadonMeasure":
        return cls(spec, spec.points(x).reshape(1, spec.N), [weight])

    @classmethod
    def unit_dirac(cls, spec: DomainSpec, x) -> "RadonMeasure":
        """``delta(x)^{-gamma} delta_x``: unit mass in ``M(Omega, delta^gamma)``."""
        p = spec.points(x).reshape(1, spec.N)
        return cls(spec, p, [float(spec.delta(p)[0]) ** (-spec.gamma)])

    @classmethod
    def atoms(cls, spec: DomainSpec, locations, masses) -> "RadonMeasure":
        return cls(spec, locations, masses)

    @classmethod
    def from_density(cls, f: GridFunction) -> "RadonMeasure":
        sp = f.mesh.spec
        return cls(sp, np.zeros((0, sp.N)), np.zeros(0), f)

    # properties -----------------------------------------------------------
    @property
    def n_atoms(self) -> int:
        return self.masses.size

    @property
    def has_atoms(self) -> bool:
        return bool(np.any(self.masses != 0.0))

    def density_values(self, mesh: Mesh | None = None) -> np.ndarray:
        """Density node values (zeros when absent; ``mesh`` then fixes the length)."""
        if self.density is None:
            if mesh is None:
                raise ValueError("measure has no density and no mesh was given")
            return np.zeros(mesh.n)
        if mesh is not None:
            self.density.same_mesh(GridFunction(mesh, np.zeros(mesh.n)))
        return self.density.values

    def is_nonnegative(self) -> bool:
        ok = bool(np.all(self.masses >= 0))
        return ok and (self.density is None or bool(np.all(self.density.values >= 0)))

    # algebra ----------------------------------------------------------------
    def _combine_density(self, other, sign):
        if self.density is None and other.density is None:
            return None
        if self.density is None:
            return other.density.with_values(sign * other.density.values)
        if other.density is None:
            return self.density
        self.density.same_mesh(other.density)
        return self.density.with_values(self.density.values + sign * other.density.values)

    def __add__(self, other: "RadonMeasure") -> "RadonMeasure":
        return RadonMeasure(self.spec, np.vstack([self.locations, other.locations]),
                            np.concatenate([self.masses, other.masses]),
                            self._combine_density(other, 1.0))

    def __neg__(self) -> "RadonMeasure":
        return self.scaled(-1.0)

    def __sub__(self, other: "RadonMeasure") -> "RadonMeasure":
        return self + (-other)

    def scaled(self, c: float) -> "RadonMeasure":
        d = None if self.density is None else self.density.with_values(c * self.density.values)
        return RadonMeasure(self.spec, self.locations, c * self.masses, d)

    def merged(self) -> "RadonMeasure":
        """Combine atoms sharing a location and drop zero masses."""
        if self.n_atoms == 0:
            return self
        keys, inv = np.unique(self.locations, axis=0, return_inverse=True)
        m = np.zeros(len(keys))
        np.add.at(m, inv.reshape(-1), self.masses)
        keep = m != 0.0
        return RadonMeasure(self.spec, keys[keep], m[keep], self.density)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        atoms = [{"x": (p[0] if self.spec.N == 1 else p), "w": float(w)}
                 for p, w in zip(self.locations.tolist(), self.masses)]
        dens = None if self.density is None else self.density.values.tolist()
        return {"atoms": atoms, "density": dens}

    @classmethod
    def from_dict(cls, d: dict, mesh: Mesh) -> "RadonMeasure":
        """Parse ``{"atoms": [{"x":..., "w":...}], "density": expr | list | null}``.

        A string density is an arithmetic expression in ``x`` (and ``y`` for
        the disk), ``r`` and ``delta`` with numpy functions ``sin``, ``cos``,
        ``exp``, ``log``, ``sqrt``, ``abs``, ``where``, ``minimum``, ``maximum``
        and the constant ``pi``.
        """
        spec = mesh.spec
        unknown = set(d) - {"atoms", "density"}
        if unknown:
            raise ConfigError(f"unknown measure keys: {sorted(unknown)}")
        atoms = d.get("atoms") or []
        loc = np.array([a["x"] for a in atoms], dtype=float).reshape(-1, spec.N)
        w = np.array([a.get("w", 1.0) for a in atoms], dtype=float)
        dens = d.get("density")
        gf = None
        if isinstance(dens, str):
            gf = GridFunction(mesh, np.broadcast_to(eval_expression(dens, mesh), (mesh.n,)), dens)
        elif dens is not None:
            gf = GridFunction(mesh, dens)
        return cls(spec, loc, w, gf)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def weighted_total_variation(mu: RadonMeasure, alpha: float, mesh: Mesh | None = None) -> float:
    """``sum_k |w_k| delta(y_k)^alpha + int |f| delta^alpha dx``."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    tv = float(np.abs(mu.masses) @ (mu.spec.delta(mu.locations) ** alpha)) if mu.n_atoms else 0.0
    if mu.density is not None:
        m = mu.density.mesh
        tv += float(np.abs(mu.density.values) @ (m.delta ** alpha * m.weights))
    return tv


def split_signs(mu: RadonMeasure) -> tuple[RadonMeasure, RadonMeasure]:
    """Jordan decomposition ``(mu+, mu-)``; coincident atoms are merged first."""
    m = mu.merged()
    pos, neg = m.masses > 0, m.masses < 0
    dp = dn = None
    if m.density is not None:
        f = m.density.values
        dp = m.density.with_values(np.maximum(f, 0.0))
        dn = m.density.with_values(np.maximum(-f, 0.0))
    return (RadonMeasure(m.spec, m.locations[pos], m.masses[pos], dp),
            RadonMeasure(m.spec, m.locations[neg], -m.masses[neg], dn))


def bump(t) -> np.ndarray:
    """``(1 - t^2)^3`` on ``|t| < 1``: a C^2 polynomial bump."""
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 3, 0.0)


def mollify(mu: RadonMeasure, scale: float, mesh: Mesh) -> RadonMeasure:
    """Replace each atom by a normalized bump of radius ``scale`` on ``mesh``.

    The bump is normalized by its own mesh quadrature, so the discrete mass of
    every atom is preserved to roundoff.

    Raises
    ------
    MollifierSupportError
        If a bump reaches the boundary or contains no node.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if mesh.spec != mu.spec:
        raise MeshMismatchError("mesh and measure live on different domains")
    f = np.array(mu.density_values(mesh), dtype=float)
    for y, w in zip(mu.locations, mu.masses):
        if scale >= float(mu.spec.delta(y)):
            raise MollifierSupportError(f"bump of radius {scale} around {y} leaves the ball")
        phi = bump(np.linalg.norm(mesh.nodes - y, axis=1) / scale)
        z = float(phi @ mesh.weights)
        if z <= 0:
            raise MollifierSupportError(f"bump of radius {scale} contains no mesh node")
        f += w * phi / z
    return RadonMeasure.from_density(GridFunction(mesh, f, "mollified"))


# --------------------------------------------------------------------------
# density expressions
# --------------------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
          "abs": np.abs, "where": np.where, "minimum": np.minimum, "maximum": np.maximum,
          "tanh": np.tanh, "sign": np.sign}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Compare,
          ast.Lt, ast.Gt, ast.LtE, ast.GtE, ast.Mod)


def eval_expression(expr: str, mesh: Mesh) -> np.ndarray:
    """Evaluate a whitelisted arithmetic expression at the mesh nodes."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse density expression {expr!r}: {exc.msg}") from None
    names = {"pi": math.pi, "delta": mesh.delta, "r": np.linalg.norm(mesh.nodes, axis=1),
             "x": mesh.nodes[:, 0]}
    if mesh.spec.N == 2:
        names["y"] = mesh.nodes[:, 1]
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"disallowed syntax in density expression: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in names and node.id not in _FUNCS:
            raise ConfigError(f"unknown name {node.id!r} in density expression")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError("only whitelisted functions may be called")
    val = eval(compile(tree, "<density>", "eval"), {"__builtins__": {}}, {**_FUNCS, **names})
    return np.asarray(val, dtype=float)


def measure_json(mu: RadonMeasure) -> str:
    return json.dumps(mu.to_dict())
