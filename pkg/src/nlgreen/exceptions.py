"""Exception hierarchy for :mod:`nlgreen`.

Every error raised deliberately by the package derives from
:class:`NLGreenError`, so callers (and the CLI) can separate numerical
refusals from programming mistakes.
"""


__all__ = [
    "NLGreenError",
    "DomainError",
    "DiagonalSingularityError",
    "BoundaryPointError",
    "SplitParameterError",
    "AtomCollisionError",
    "MeshMismatchError",
    "MollifierSupportError",
    "NonlinearityError",
    "InvalidTestFunctionError",
    "GoodMeasureError",
    "DivergenceError",
    "MonotonicityError",
    "OrderingError",
    "WindowError",
    "SizeGuardError",
    "CriticalityError",
    "ConfigError",
]


class NLGreenError(Exception):
    """Base class for all package errors."""


class DomainError(NLGreenError, ValueError):
    """Invalid geometry: bad dimension/order, or a point outside the ball."""


class DiagonalSingularityError(NLGreenError, ValueError):
    """A kernel was evaluated on the diagonal ``x == y``."""


class BoundaryPointError(NLGreenError, ValueError):
    """A Martin kernel was requested at a point not on the sphere ``|z| = R``."""


class SplitParameterError(NLGreenError, ValueError):
    """Regularized split with an inadmissible exponent or radius."""


class AtomCollisionError(NLGreenError, ValueError):
    """A Dirac atom sits too close to a quadrature node."""


class MeshMismatchError(NLGreenError, ValueError):
    """Grid data defined on a different mesh than the operator."""


class MollifierSupportError(NLGreenError, ValueError):
    """Mollifier bump would leave the domain."""


class NonlinearityError(NLGreenError, ValueError):
    """A nonlinearity fails monotonicity or ``g(0) = 0``."""


class InvalidTestFunctionError(NLGreenError, ValueError):
    """A test function with ``G[xi]`` of the wrong sign."""


class GoodMeasureError(NLGreenError):
    """The envelope integrability condition cannot be certified."""


class DivergenceError(NLGreenError):
    """An iteration exceeded its budget; carries the residual history."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class MonotonicityError(NLGreenError):
    """A monotone iteration moved the wrong way (kernel positivity broken)."""


class OrderingError(NLGreenError, ValueError):
    """Data pair whose ordering cannot be verified."""


class WindowError(NLGreenError, ValueError):
    """Translation window leaves the domain after shifting."""


class SizeGuardError(NLGreenError, ValueError):
    """Dense factorization requested on a mesh that is too large."""


class CriticalityError(NLGreenError, ValueError):
    """Exponent at or above the critical value for the requested run."""


class ConfigError(NLGreenError, ValueError):
    """Malformed or schema-violating run configuration."""
