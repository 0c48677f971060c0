"""Semilinear problem u + G[u^p] = G[mu] with a Dirac datum.

Below the critical exponent p* the problem is solvable for every weighted
measure.  The solution sits between -G[mu-] and G[mu+], and it does not
depend on where the fixed-point iteration starts.
"""
import numpy as np

from nlgreen import (DomainSpec, GoodMeasureError, Nonlinearity, RadonMeasure, SolverConfig, assemble,
                     build_mesh, criticality_gate, make_backend, p_star, picard_solve)
from nlgreen.greenop import nudge_off_nodes
from nlgreen.spaces import l1_weighted

spec = DomainSpec(1, 0.25, 0.25)
mesh = build_mesh(spec, 256, 2.0)
op = assemble(make_backend("rfl", spec), mesh)
ps = p_star(spec.N, spec.s, spec.gamma)
print(f"p* = (N + gamma) / (N + gamma - 2s) = {ps:.6f}")

y = nudge_off_nodes(op, np.array([0.3]))      # atoms must not sit on a node
mu = RadonMeasure.dirac(spec, y, 1.0)
cfg = SolverConfig(tol=1e-10)

for p in (1.1, 1.3, 1.6):
    g = Nonlinearity.power(p)
    u, rep = picard_solve(op, g, mu, cfg)
    free = op.apply_measure(mu).values
    print(f"p = {p}: {rep.iterations:4d} iterations, residual {rep.residual:.1e}, "
          f"max u / max G[mu] = {u.values.max() / free.max():.4f}")

# different starting points converge to the same solution
g = Nonlinearity.power(1.5)
sols = [picard_solve(op, g, mu, cfg, u0=u0)[0].values
        for u0 in (np.zeros(mesh.n), op.apply_measure(mu).values, np.sin(7 * mesh.x))]
print("spread over starts:", max(l1_weighted(mesh, s - sols[0], spec.gamma) for s in sols))

# at or above p* Dirac data are refused
try:
    criticality_gate(Nonlinearity.power(2.0), spec, mu)
except GoodMeasureError as exc:
    print("refused:", exc)
