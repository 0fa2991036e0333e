"""Exception hierarchy shared by all modules."""


class EscortBoundsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EscortBoundsError, ValueError):
    """A parameter lies outside (or on the boundary of) its open domain."""


class QuadratureError(EscortBoundsError, ArithmeticError):
    """Numerical integration failed to converge or produced NaN."""


class NotPositiveDefinite(EscortBoundsError, ArithmeticError):
    """Cholesky factorization hit a non-positive or negligible pivot.

    Attributes
    ----------
    pivot : int
        1-based index of the failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot {self.pivot})")


class NodeError(EscortBoundsError, ValueError):
    """Invalid node set for divided differences (duplicates, domain, support)."""


class SupportError(NodeError):
    """An escort support escapes the support of the model at the base node."""


class RegularityError(EscortBoundsError):
    """A score function violates the zero-mean / finite-variance requirement."""


class CatalogError(EscortBoundsError, KeyError):
    """Unknown catalog name or invalid hyperparameters."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SynthesisError(EscortBoundsError):
    """No valid escort density could be synthesized."""
