"""Exception hierarchy.

ConfigError maps to CLI exit code 1, NumericalError to exit code 2.
"""


class MlmcFvError(Exception):
    pass


class ConfigError(MlmcFvError):
    pass


class NumericalError(MlmcFvError):
    pass


class MonotonicityViolation(NumericalError):
    """Flux derivative is not strictly positive on the requested bracket."""


class OutOfMonotoneRange(NumericalError):
    """Inversion target lies outside the flux image of the monotone bracket."""


class DegenerateSubdomain(NumericalError):
    """Interface snapping merged two interfaces or hit the domain boundary."""


class CflViolation(NumericalError):
    """Time step ratio violates the CFL stability constraint."""


class InvalidTolerance(ConfigError):
    """Sample-number optimization called with an unreachable error tolerance."""


class ZeroReference(NumericalError):
    """Relative error requested against a reference with zero L1 norm."""


class DegenerateFit(NumericalError):
    """Order-of-convergence fit requested on constant abscissae."""


class UnsupportedDimension(ConfigError):
    """Quadrature reference supports one or two stochastic dimensions only."""
