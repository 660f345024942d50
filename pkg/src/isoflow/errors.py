"""Exception hierarchy shared by the analysis, simulation and CLI layers."""


class IsoflowError(Exception):
    """Base class for all package errors."""


class DomainError(IsoflowError, ValueError):
    """An argument lies outside the domain of a numeric routine."""


class ValidationError(IsoflowError, ValueError):
    """A model or diffusion failed a structural check.

    ``witness`` holds the sampled point at which the check failed, if any.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegenerateModelError(ValidationError):
    """The distance diffusion has a vanishing diffusion coefficient."""


class PreconditionError(IsoflowError):
    """A request is well-formed but the theory does not apply to it."""


class FitFailure(IsoflowError):
    """Power-law fit at an endpoint could not be carried out."""


class NonConvergenceError(IsoflowError):
    """Quadrature neither converged nor detected a confident divergence."""


class InconclusiveError(NonConvergenceError):
    """A boundary or mass classification could not be decided numerically."""


class ConsistencyError(IsoflowError):
    """Two independent computations of the same quantity disagree."""


class StepSizeError(IsoflowError):
    """The simulation step could not be honoured near a boundary."""
