"""Discrete Green operator: assembly, application, and the operator-level checks.

The matrix ``A`` approximates ``A_ij = int_{cell j} G(x_i, y) dy``.  Off the
diagonal ``A_ij = G(x_i, x_j) w_j``.  The diagonal uses the regularized
split ``G = lead r^{2s-N} (1 - K_eps) + [G - lead r^{2s-N} (1 - K_eps)]``:

* the singular head is integrated exactly over ``B_eps(x_i) cap Omega``;
* the bracket is bounded, with limit ``regular_diag(x_i)`` at ``y = x_i``,
  and is summed by the midpoint rule;
* subtracting the off-diagonal midpoint sum of the head leaves the
  own-cell contribution.

Row sums therefore reproduce ``G[1](x_i)`` to midpoint accuracy, and the
kernel matrix ``A / w`` stays exactly symmetric.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import Mesh
from .exceptions import (AtomCollisionError, MeshMismatchError, SizeGuardError, WindowError)
from .kernels import KernelBackend, RegularizedSplit, make_split
from .measures import RadonMeasure
from .quadrature import green_apply_reference, head_integral, head_moment
from .spaces import GridFunction, lq_norm

#: Atoms must keep at least this fraction of the local cell radius from every node.
COLLISION_FRACTION = 0.5
#: Dense factorizations are refused above this many nodes.
MAX_DENSE = 4000


@dataclass(frozen=True)
class AssemblyReport:
    method: str
    eps: float
    beta: float
    n: int
    backend: str
    mesh_hash: str
    min_diag: float


@dataclass(frozen=True)
class TestFunction:
    """``xi = delta^gamma * factor`` with a bounded ``factor``.

    Parameters
    ----------
    factor : callable
        Vectorized bounded function of the point (abscissa for ``N = 1``).
    name : str
    """

    __test__ = False          # not a pytest class
    factor: object
    name: str = "xi"

    def __call__(self, spec, pts) -> np.ndarray:
        P = spec.points(pts).reshape(-1, spec.N)
        arg = P[:, 0] if spec.N == 1 else P
        d = np.maximum(spec.R - np.linalg.norm(P, axis=1), 0.0)
        return d ** spec.gamma * np.broadcast_to(self.factor(arg), (P.shape[0],))

    def on_mesh(self, mesh: Mesh) -> GridFunction:
        return GridFunction(mesh, self(mesh.spec, mesh.nodes), self.name)

    def gradient(self, spec, pts, h: float = 1e-6) -> np.ndarray:
        """Central-difference gradient, shape ``(m, N)``."""
        P = spec.points(pts).reshape(-1, spec.N)
        out = np.empty_like(P)
        for k in range(spec.N):
            e = np.zeros(spec.N)
            e[k] = h
            out[:, k] = (self(spec, P + e) - self(spec, P - e)) / (2 * h)
        return out


class DiscreteGreenOperator:
    """Dense quadrature-weighted kernel matrix on a mesh.

    Attributes
    ----------
    mesh : Mesh
    backend : KernelBackend
    split : RegularizedSplit
    A : ndarray, shape (n, n)
        ``A_ij ~ int_{cell j} G(x_i, y) dy``; read-only.
    report : AssemblyReport
    """

    def __init__(self, mesh: Mesh, backend: KernelBackend, split: RegularizedSplit, A: np.ndarray,
                 report: AssemblyReport):
        if backend.spec != mesh.spec:
            raise MeshMismatchError("backend and mesh describe different domains")
        A = np.ascontiguousarray(A, dtype=float)
        A.setflags(write=False)
        self.mesh, self.backend, self.split, self.A, self.report = mesh, backend, split, A, report

    @property
    def n(self) -> int:
        return self.mesh.n

    @property
    def spec(self):
        return self.mesh.spec

    @property
    def kernel_matrix(self) -> np.ndarray:
        """Symmetric ``A_ij / w_j``."""
        return self.A / self.mesh.weights[None, :]

    # application ------------------------------------------------------------
    def _check(self, f: GridFunction):
        if f.mesh is not self.mesh and f.mesh.hash != self.mesh.hash:
            raise MeshMismatchError("grid function lives on a different mesh")

    def apply(self, values) -> np.ndarray:
        return self.A @ np.asarray(values, dtype=float)

    def atom_columns(self, locations) -> np.ndarray:
        """``G(x_i, y_k)`` for atoms ``y_k``, shape ``(n, k)``.

        Raises
        ------
        AtomCollisionError
            If an atom is closer than ``COLLISION_FRACTION`` times the local
            cell radius to a node.
        """
        Y = self.spec.points(locations).reshape(-1, self.spec.N)
        if Y.shape[0] == 0:
            return np.zeros((self.n, 0))
        X = self.mesh.nodes
        r = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
        j = np.argmin(r, axis=0)
        gap = r[j, np.arange(Y.shape[0])]
        bad = gap < COLLISION_FRACTION * self.mesh.cell_radius[j]
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise AtomCollisionError(
                f"atom {Y[k].tolist()} lies {gap[k]:.3g} from node {int(j[k])} "
                f"(cell radius {self.mesh.cell_radius[j[k]]:.3g})")
        return self.backend._green(X[:, None, :], Y[None, :, :])

    def eval_at(self, points, values) -> np.ndarray:
        """Nystrom extension ``sum_i G(y, x_i) v_i w_i`` at off-node points ``y``."""
        return self.atom_columns(points).T @ (np.asarray(values, dtype=float) * self.mesh.weights)

    def apply_density(self, f: GridFunction) -> GridFunction:
        """``G[f]`` at the nodes."""
        self._check(f)
        return GridFunction(self.mesh, self.A @ f.values, "G[f]")

    def apply_measure(self, mu: RadonMeasure) -> GridFunction:
        """``G[mu]`` at the nodes: exact atom columns plus the density part."""
        if mu.spec != self.spec:
            raise MeshMismatchError("measure and operator live on different domains")
        v = self.atom_columns(mu.locations) @ mu.masses if mu.n_atoms else np.zeros(self.n)
        if mu.density is not None:
            self._check(mu.density)
            v = v + self.A @ mu.density.values
        return GridFunction(self.mesh, v, "G[mu]")

    def pair_with_measure(self, xi_values, mu: RadonMeasure) -> float:
        """Discrete ``int G[xi] dmu`` consistent with :meth:`apply_measure`."""
        gx = self.A @ np.asarray(xi_values, dtype=float)
        tot = 0.0
        if mu.n_atoms:
            tot += float(mu.masses @ self.eval_at(mu.locations, xi_values))
        if mu.density is not None:
            tot += float((mu.density.values * gx) @ self.mesh.weights)
        return tot

    # persistence --------------------------------------------------------------
    def header(self) -> dict:
        return {"mesh_hash": self.mesh.hash, "n": self.n, "backend": self.backend.to_dict(),
                "split": self.split.to_dict(), "mesh": {"resolution": self.mesh.resolution,
                                                        "grading": self.mesh.grading},
                "dtype": "<f8", "order": "C"}

    def save(self, path) -> None:
        """Write a JSON header line followed by the row-major little-endian table."""
        head = json.dumps(self.header(), sort_keys=True).encode() + b"\n"
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(self.A.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path, mesh: Mesh, backend: KernelBackend) -> "DiscreteGreenOperator":
        with open(path, "rb") as fh:
            head = json.loads(fh.readline())
            data = fh.read()
        if head["mesh_hash"] != mesh.hash:
            raise MeshMismatchError("stored operator was assembled on a different mesh")
        A = np.frombuffer(data, dtype="<f8").reshape(head["n"], head["n"]).copy()
        sp = RegularizedSplit(**head["split"])
        rep = AssemblyReport("loaded", sp.eps, sp.beta, head["n"], backend.variant, mesh.hash,
                             float(np.min(np.diag(A))))
        return cls(mesh, backend, sp, A, rep)


def default_split(mesh: Mesh, beta: float | None = None) -> RegularizedSplit:
    """Assembly split with the mesh-independent radius ``eps = R / 2``.

    The cutoff has a kink at ``|x - y| = eps``; tying ``eps`` to the cell size
    would make the midpoint error of the kink decay only like ``h^{2s}``.
    """
    return make_split(mesh.spec, 0.5 * mesh.spec.R, beta)


def cell_split(mesh: Mesh, eps_cells: float = 4.0, beta: float | None = None) -> RegularizedSplit:
    """Diagnostic split with ``eps = eps_cells`` times the largest cell diameter (capped at ``R/2``)."""
    eps = min(eps_cells * float(mesh.diameters.max()), 0.5 * mesh.spec.R)
    return make_split(mesh.spec, eps, beta)


def assemble(backend: KernelBackend, mesh: Mesh, split: RegularizedSplit | None = None) -> DiscreteGreenOperator:
    """Assemble the dense operator with split-based diagonal correction.

    Parameters
    ----------
    backend : KernelBackend
    mesh : Mesh
    split : RegularizedSplit, optional
        Defaults to :func:`default_split`.
    """
    if backend.spec != mesh.spec:
        raise MeshMismatchError("backend and mesh describe different domains")
    split = default_split(mesh) if split is None else split
    split.check(mesh.spec)
    sp = mesh.spec
    X, w = mesh.nodes, mesh.weights
    n = mesh.n
    r = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    np.fill_diagonal(r, 1.0)
    G = _green_offdiag(backend, X)
    a = 2 * sp.s - sp.N
    head = r ** a * (1.0 - split.cutoff(r))
    np.fill_diagonal(head, 0.0)
    exact = head_integral(sp, X, split.eps, split.beta)
    diag = backend.lead * (exact - head @ w) + backend.regular_diag(X) * w
    A = G * w[None, :]
    A[np.arange(n), np.arange(n)] = diag
    rep = AssemblyReport("split-subtraction", split.eps, split.beta, n, backend.variant, mesh.hash,
                         float(diag.min()))
    return DiscreteGreenOperator(mesh, backend, split, A, rep)


def _green_offdiag(backend, X):
    n = X.shape[0]
    G = np.empty((n, n))
    iu = np.triu_indices(n, 1)
    vals = backend._green(X[iu[0]], X[iu[1]])
    G[iu] = vals
    G[iu[1], iu[0]] = vals           # exact symmetry
    np.fill_diagonal(G, 0.0)
    return G


# --------------------------------------------------------------------------
# operator-level checks
# --------------------------------------------------------------------------

def asymmetry(op: DiscreteGreenOperator) -> float:
    """Max relative off-diagonal asymmetry of ``A_ij / w_j``."""
    K = op.kernel_matrix
    off = ~np.eye(op.n, dtype=bool)
    return float(np.max(np.abs(K - K.T)[off] / np.abs(K)[off]))


def duality_gap(op: DiscreteGreenOperator, mu: RadonMeasure, xi: TestFunction) -> dict:
    """Compare ``int G[mu] xi dx`` (mesh) against ``int G[xi] dmu`` (reference).

    The mesh side sums ``G(x_i, y_k) xi_i w_i`` and corrects the midpoint
    rule on the two leading head terms ``lead |x - y|^{2s-N}`` times
    ``xi(y) + grad xi(y) . (x - y)``, whose integrals over the ball are
    known exactly.  The reference side
    evaluates ``G[xi](y_k)`` by mesh-free adaptive quadrature.  A density part
    is paired discretely on both sides.

    Returns
    -------
    dict
        ``lhs``, ``rhs``, ``gap`` (absolute) and ``scale`` (``|rhs|``).
    """
    sp, mesh = op.spec, op.mesh
    xv = xi(sp, mesh.nodes)
    lhs = rhs = 0.0
    if mu.n_atoms:
        cols = op.atom_columns(mu.locations)
        diff = mesh.nodes[:, None, :] - mu.locations[None, :, :]      # (n, k, N)
        ra = np.linalg.norm(diff, axis=-1) ** (2 * sp.s - sp.N)
        disc0 = ra.T @ mesh.weights
        disc1 = np.einsum("nk,nkd,n->kd", ra, diff, mesh.weights)
        corr = xi(sp, mu.locations) * (head_integral(sp, mu.locations) - disc0)
        corr += np.sum(xi.gradient(sp, mu.locations) * (head_moment(sp, mu.locations) - disc1), axis=1)
        corr *= op.backend.lead
        lhs += float(mu.masses @ (cols.T @ (xv * mesh.weights) + corr))

        def phi(p):
            return xi(sp, p)
        ref = [green_apply_reference(op.backend, phi, y) for y in mu.locations]
        rhs += float(mu.masses @ np.array(ref))
    if mu.density is not None:
        lhs += float((op.A @ mu.density.values) @ (xv * mesh.weights))
        rhs += float((op.A @ xv) @ (mu.density.values * mesh.weights))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "scale": abs(rhs)}


def sup_bound_check(op: DiscreteGreenOperator, f: GridFunction, r: float) -> dict:
    """``||G[f]||_inf / ||f||_{L^r(delta^gamma)}`` and a discrete modulus of continuity.

    Warns (and still reports) when ``r <= (N + gamma) / (2s)``.
    """
    sp = op.spec
    thr = (sp.N + sp.gamma) / (2 * sp.s)
    if r <= thr:
        warnings.warn(f"r = {r} is not above (N + gamma)/(2s) = {thr}", RuntimeWarning, stacklevel=2)
    u = op.apply_density(f).values
    nf = lq_norm(f, r, sp.gamma)
    ratio = 0.0 if nf == 0 else float(np.max(np.abs(u)) / nf)
    hs = [0.4, 0.2, 0.1, 0.05]
    X = op.mesh.nodes
    D = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    dU = np.abs(u[:, None] - u[None, :])
    modulus = [float(dU[D <= h].max()) for h in hs]
    return {"ratio": ratio, "threshold": thr, "r": r, "h": hs, "modulus": modulus,
            "sup": float(np.max(np.abs(u))), "lr_norm": nf}


def translation_lattice(spec, window, spacing: float) -> np.ndarray:
    """Cell centres ``(k + 1/2) spacing`` of the uniform lattice inside the window.

    ``window`` is an interval ``(a, b)`` for ``N = 1`` or a radius for ``N = 2``.
    """
    if spec.N == 1:
        a, b = window
        k = np.arange(np.ceil(a / spacing - 0.5), np.floor(b / spacing - 0.5) + 1)
        return ((k + 0.5) * spacing)[:, None]
    rho = float(window)
    k = np.arange(-np.ceil(rho / spacing) - 1, np.ceil(rho / spacing) + 1)
    P = np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).reshape(-1, 2)
    P = (P + 0.5) * spacing
    return P[np.linalg.norm(P, axis=1) <= rho]


def translation_equicontinuity(op: DiscreteGreenOperator, family, h, window,
                               diagnostics: bool = False, spacing: float | None = None):
    """``sup_mu int_K |G[mu](x + h) - G[mu](x)| dx`` over atom measures.

    The integral is a midpoint sum over the cell centres of a uniform lattice
    of the given ``spacing`` (default ``R / 1024`` for ``N = 1`` and
    ``R / 256`` for ``N = 2``); values come straight from the kernel.  Atoms
    placed on lattice vertices stay at least ``spacing / 2`` away from every
    sample, and shifts that are lattice multiples keep that property for the
    shifted samples too.  ``window`` is an interval ``(a, b)`` for ``N = 1``
    or a radius for ``N = 2`` (disk centred at 0).  A scalar ``h`` shifts
    along the first axis.

    With ``diagnostics=True`` also returns the split terms ``J1`` (near field
    at ``x + h``), ``J2`` (near field at ``x``) and ``J3`` (far-field
    difference), whose sum bounds the value.
    """
    sp = op.spec
    if spacing is None:
        spacing = sp.R / (1024 if sp.N == 1 else 256)
    hv = np.zeros(sp.N)
    if np.ndim(h) == 0:
        hv[0] = float(h)
    else:
        hv[:] = np.asarray(h, dtype=float).reshape(sp.N)
    if sp.N == 1:
        a, b = window
        reach = max(abs(a), abs(b)) + abs(hv[0])
    else:
        reach = float(window) + float(np.linalg.norm(hv))
    if reach >= sp.R:
        raise WindowError("window shifted by h leaves the domain")
    X = translation_lattice(sp, window, spacing)
    Xh = X + hv
    w = spacing ** sp.N
    best = 0.0
    J = np.zeros(3)
    for mu in family:
        if mu.density is not None:
            raise ValueError("translation test takes atom-only measures")
        if np.linalg.norm(hv) == 0.0:
            continue
        G0 = op.backend.green(X[:, None, :], mu.locations[None, :, :])
        G1 = op.backend.green(Xh[:, None, :], mu.locations[None, :, :])
        val = float(np.abs((G1 - G0) @ mu.masses).sum() * w)
        if val >= best:
            best = val
            if diagnostics:
                K0 = op.split.cutoff(np.linalg.norm(X[:, None, :] - mu.locations[None], axis=-1))
                K1 = op.split.cutoff(np.linalg.norm(Xh[:, None, :] - mu.locations[None], axis=-1))
                J = np.array([np.abs((G1 * (1 - K1)) @ mu.masses).sum() * w,
                              np.abs((G0 * (1 - K0)) @ mu.masses).sum() * w,
                              np.abs((G1 * K1 - G0 * K0) @ mu.masses).sum() * w])
    if diagnostics:
        return {"value": best, "J1": float(J[0]), "J2": float(J[1]), "J3": float(J[2]), "eps": op.split.eps}
    return best


def singular_value_decay(op: DiscreteGreenOperator, alpha: float = 0.0, k: int | None = None) -> np.ndarray:
    """Singular values of ``G`` acting on ``L^2(Omega, delta^alpha)``.

    In the orthonormal coordinates ``v = (delta^alpha w)^{1/2} u`` the matrix
    is ``S A S^{-1}`` with ``S = diag((delta^alpha w)^{1/2})``.
    """
    if op.n > MAX_DENSE:
        raise SizeGuardError(f"{op.n} nodes exceed the dense limit {MAX_DENSE}")
    sc = np.sqrt(op.mesh.delta ** alpha * op.mesh.weights)
    sv = np.linalg.svd(sc[:, None] * op.A / sc[None, :], compute_uv=False)
    return sv if k is None else sv[:k]


def marcinkiewicz_continuity(op: DiscreteGreenOperator, gamma_prime: float, alpha: float,
                             distances=(0.5, 0.25, 0.125, 0.0625, 0.03125)) -> dict:
    """Band of ``|||G[mu]|||_{M^{p*}(delta^alpha)} / ||mu||_{M(delta^gamma')}`` over unit Diracs
    marching to the boundary along the first axis."""
    from .measures import weighted_total_variation
    from .spaces import critical_exponent, marcinkiewicz_quasinorm
    sp = op.spec
    q = critical_exponent(sp.N, sp.s, gamma_prime, alpha)
    vals = []
    for d in distances:
        y = np.zeros(sp.N)
        y[0] = sp.R - d
        y = nudge_off_nodes(op, y)
        mu = RadonMeasure.dirac(sp, y, 1.0)
        u = op.apply_measure(mu)
        vals.append(marcinkiewicz_quasinorm(u, q, alpha) / weighted_total_variation(mu, gamma_prime))
    return {"q": q, "ratios": vals, "band": (min(vals), max(vals))}


def nudge_off_nodes(op: DiscreteGreenOperator, y) -> np.ndarray:
    """Move ``y`` to the nearest cell face if it is too close to a node (keeps atoms admissible)."""
    y = np.array(y, dtype=float)
    X = op.mesh.nodes
    r = np.linalg.norm(X - y, axis=1)
    j = int(np.argmin(r))
    if r[j] >= COLLISION_FRACTION * op.mesh.cell_radius[j]:
        return y
    d = y - X[j] if r[j] > 0 else np.eye(op.spec.N)[0]
    return X[j] + d / np.linalg.norm(d) * op.mesh.cell_radius[j] * 0.75
