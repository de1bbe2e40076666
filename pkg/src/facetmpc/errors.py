"""Exception types shared across the toolkit."""


class FacetMpcError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(FacetMpcError):
    """Operands disagree on required dimensions."""


class SingularMatrix(FacetMpcError):
    """Matrix is singular to working precision."""


class NumericalFailure(FacetMpcError):
    """An iterative numerical routine failed to terminate cleanly."""


class NotPositiveDefinite(FacetMpcError):
    """Quadratic cost matrix fails the positive-definiteness screen."""


class NonConvergence(FacetMpcError):
    """Eigenvalue computation did not converge."""


class ZeroRow(FacetMpcError):
    """A hyperplane row has a numerically zero normal."""


class EmptyInput(FacetMpcError):
    """Operation requires a nonempty polytope."""


class OutsideFeasibleSet(FacetMpcError):
    """Query point lies in no critical region."""


class GenerationExhausted(FacetMpcError):
    """Rejection sampling hit its retry cap."""


class InfeasibleOcp(FacetMpcError):
    """The centralized optimal control problem is infeasible at this state."""


class InfeasibleLocalOcp(FacetMpcError):
    """A local controller's problem is infeasible at the current parameters."""
