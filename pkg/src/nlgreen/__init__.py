"""Weak-dual solutions of nonlocal semilinear problems with measure data.

The package solves ``u + G[g(u)] = G[mu]`` on a ball, where ``G`` is the
Green operator of a fractional-type operator with homogeneous exterior or
boundary condition, ``g`` is a nondecreasing absorption and ``mu`` a
weighted Radon measure.  It also checks the structural properties the
solution theory rests on.

Modules
-------
domain       ball geometry and boundary-graded meshes
kernels      Green and Martin kernels, envelopes, the regularized split
measures     weighted Radon measures (atoms plus densities), mollification
spaces       weighted Lebesgue and Marcinkiewicz norms, critical exponents
greenop      discrete Green operator and operator-level checks
solver       fixed-point solvers, Kato inequalities, comparison
experiments  boundary singularity, stability and criticality runs
cli          command-line front end (``nlgreen``)
"""
from importlib.metadata import PackageNotFoundError, version as _pkg_version

try:
    __version__ = _pkg_version("artifact")
except PackageNotFoundError:       # running from a source tree
    __version__ = "0.1.0"

from .domain import DomainSpec, Mesh, build_mesh, distance_to_boundary
from .exceptions import *  # noqa: F401,F403
from .greenop import (DiscreteGreenOperator, TestFunction, assemble, asymmetry, duality_gap,
                      singular_value_decay, translation_equicontinuity)
from .kernels import (CFLSurrogate, EnvelopeKernel, KernelBackend, RFLBall, SFLInterval, envelope_band,
                      envelope_bounds, green_eval, kernel_split, make_backend, make_split, martin_eval)
from .measures import RadonMeasure, mollify, split_signs, weighted_total_variation
from .nonlinearity import Nonlinearity
from .solver import (ConvexProfile, KatoReport, SolveReport, SolverConfig, TruncationEnvelope,
                     comparison_test, convex_kato_check, criticality_gate, kato_check, monotone_solve,
                     picard_solve, weak_dual_residual)
from .spaces import (GridFunction, critical_exponent, lq_norm, marcinkiewicz_norm, marcinkiewicz_quasinorm,
                     p_star, subcritical_check)
