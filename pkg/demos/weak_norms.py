"""Marcinkiewicz norms of a Green potential.

G[delta_y] has a singularity |x - y|^{2s - N} and is not in L^q for
q >= N / (N - 2s), but it stays in the weak space M^q.  Under refinement
the L^2 norm keeps growing (like sqrt(log n) here), the weak quasinorm stays
near 0.67 and the weak norm stays within q / (q - 1) of it.
"""
import numpy as np

from nlgreen import (DomainSpec, RadonMeasure, assemble, build_mesh, lq_norm, make_backend,
                     marcinkiewicz_norm, marcinkiewicz_quasinorm)
from nlgreen.greenop import nudge_off_nodes

spec = DomainSpec(1, 0.25, 0.25)
b = make_backend("rfl", spec)
q = 2.0                                     # N / (N - 2s) = 2 on the interval with s = 1/4

for n in (64, 128, 256, 512):
    mesh = build_mesh(spec, n, 2.0)
    op = assemble(b, mesh)
    y = nudge_off_nodes(op, np.array([0.1234]))      # keep the atom off the nodes
    u = op.apply_measure(RadonMeasure.dirac(spec, y))
    print(f"n = {n:4d}   L^2 {lq_norm(u, q, 0.25):7.3f}   weak quasinorm {marcinkiewicz_quasinorm(u, q, 0.25):.4f}"
          f"   weak norm {marcinkiewicz_norm(u, q, 0.25):.4f}")
