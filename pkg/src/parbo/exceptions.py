"""Exception hierarchy shared across the package."""


class ParboError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ParboError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(ParboError, ValueError):
    """Inconsistent or incomplete configuration."""


class NumericalError(ParboError, ArithmeticError):
    """A linear-algebra or iterative routine failed to produce a valid result."""


class OptimizationError(ParboError, RuntimeError):
    """Acquisition-function minimization produced no usable candidate."""


class EmptyRegionError(OptimizationError):
    """A level-set band contains no feasible probe point."""


class BatchRejectedError(ParboError, ArithmeticError):
    """Joint posterior covariance of a batch is singular (points too close)."""


class DegenerateReferenceError(ParboError, ValueError):
    """Reference surrogate is flat, so level-set thresholds collapse."""


class SolverError(NumericalError):
    """Steady-state reactor solve did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PhysicalInfeasibilityError(ParboError, ValueError):
    """A converged steady state has negative concentrations."""
