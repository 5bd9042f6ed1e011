"""Exception hierarchy shared across the package.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map them onto exit codes (validation errors vs. solver
failures) without string matching.
"""

from __future__ import annotations


class CloakMapError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrixError(CloakMapError):
    """A transformation Jacobian is numerically singular."""


class OrientationError(CloakMapError):
    """A gradient pair is not positively oriented (determinant <= 0)."""


class DegenerateAngleError(CloakMapError):
    """The angle between gradients is too close to 0 or pi."""


class NonPositiveSlopeError(CloakMapError):
    """A radial amplitude slope is not strictly positive."""


class InadmissibleProfileError(CloakMapError):
    """A sampled amplitude profile violates admissibility (slopes, endpoints)."""


class DomainError(CloakMapError):
    """An argument lies outside the mathematical domain of an operation."""


class InversionRangeError(CloakMapError):
    """A requested momentum value is outside the range of the momentum map."""


class ConvergenceError(CloakMapError):
    """An iterative solver exhausted its budget; the message reports the last bracket."""


class AdmissibilityError(CloakMapError):
    """A field pair fails the orientation condition Du . V > 0 somewhere.

    ``nodes`` holds the offending (radial index, angular index) pairs.
    """

    def __init__(self, message: str, nodes=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)


class OutOfAnnulusError(CloakMapError):
    """A point maps outside the reference annulus (beyond tolerance)."""


class UnknownMapError(CloakMapError):
    """An analytic map name is not one of the built-ins."""


class RetryBudgetError(CloakMapError):
    """Random perturbation sampling exhausted its admissibility retry budget."""
