"""Green kernels on the unit interval and disk.

Evaluate the restricted and spectral kernels, compare them with the
two-sided envelope, and check the discrete operator against the closed-form
torsion function G[1].
"""
import math

import numpy as np

from nlgreen import DomainSpec, assemble, build_mesh, envelope_band, make_backend

# restricted fractional Laplacian, s = 1/4, on (-1, 1)
spec = DomainSpec(1, 0.25, 0.25)
rfl = make_backend("rfl", spec)
print("G(0, 0.5)       =", float(rfl.green(np.array([0.0]), np.array([0.5]))))

# the spectral kernel has the larger boundary exponent gamma = 1
sfl = make_backend("sfl", DomainSpec(1, 0.25, 1.0))
print("G_sfl(0, 0.5)   =", float(sfl.green(np.array([0.0]), np.array([0.5]))))

# G / E over 10^4 random pairs stays in a narrow band
for b in (rfl, sfl):
    c1, c2 = envelope_band(b, 10_000, seed=0)
    print(f"{b.__class__.__name__:12s} envelope band [{c1:.3f}, {c2:.3f}], ratio {c2 / c1:.2f}")

# Nystrom operator: row sums approximate G[1] = c (1 - x^2)^s
s = spec.s
c = math.gamma(0.5) / (4 ** s * math.gamma(1 + s) * math.gamma(0.5 + s))
for n in (64, 128, 256):
    mesh = build_mesh(spec, n, 2.0)
    op = assemble(rfl, mesh)
    exact = c * (1 - mesh.x ** 2) ** s
    err = np.abs(op.A.sum(axis=1) - exact) @ (mesh.delta ** s * mesh.weights)
    print(f"n = {n:4d}   L1(delta^s) torsion error {err:.2e}")

# the same on the disk, s = 1/2
spec2 = DomainSpec(2, 0.5, 0.5)
mesh2 = build_mesh(spec2, 18, 1.5)
op2 = assemble(make_backend("rfl", spec2), mesh2)
print("disk nodes:", mesh2.n, " max |A - A^T| weighted:",
      np.abs(op2.A * mesh2.weights[:, None] - (op2.A * mesh2.weights[:, None]).T).max())

# Martin kernel: the boundary-normalized limit of G(x, y) / delta(y)^gamma
z = np.array([1.0])
for d in (1e-2, 1e-3, 1e-4):
    y = np.array([1.0 - d])
    print(f"d = {d:g}:  G(0, y) / d^s = {float(rfl.green(np.array([0.0]), y)) / d ** s:.6f}")
print("M(0, 1)         =", float(rfl.martin(np.array([0.0]), z)))
