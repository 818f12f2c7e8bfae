"""Exception types shared across the toolkit."""


class PshlabError(Exception):
    """Base class for all toolkit errors."""


class InsufficientNodesError(PshlabError):
    """Raised when a quadrature node budget is too small to build a rule."""


class PoleInStencilError(PshlabError):
    """Raised when a finite-difference stencil touches the pole set of a field."""


class CylinderOutsideDomainError(PshlabError):
    """Raised when a translated cylinder is not contained in a field's domain."""


class WeightOverflowError(PshlabError):
    """Raised when e^{-weight} overflows at a quadrature node."""


class MetricNotPositiveError(PshlabError):
    """Raised when a Hermitian metric matrix is not positive definite."""


class ContinuityRequiredError(PshlabError):
    """Raised when an operation needs a continuous field but got a usc-only one."""


class SingularGramError(PshlabError):
    """Raised when a Gram system stays singular after ridge regularization."""


class DegenerateWeightError(PshlabError):
    """Raised when a weight or candidate degenerates on a positive-measure node set."""
