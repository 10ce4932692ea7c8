"""Exceptions raised across the efpp packages.

Every failure a caller can act on has its own class; audits never raise for
property violations, they return reports instead.
"""


class EfppError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(EfppError, ValueError):
    """An argument violates a documented precondition."""


class EmptyDomainError(EfppError):
    """A query needs at least one particle but the point set is empty."""


class NoPathError(EfppError):
    """The requested endpoints are not connected in the candidate graph."""


class UnstablePruneError(EfppError):
    """The candidate edge set kept changing after every budget doubling."""


class GuardError(EfppError):
    """An exhaustive oracle was asked for an instance it cannot enumerate."""


class CoverageError(EfppError):
    """A tree query referenced a particle outside the tree's coverage."""


class WindowPolicyError(EfppError):
    """Too many results stayed untrusted after window regrowth."""


class RegressionError(EfppError):
    """A log-log regression was requested on an unusable grid."""


class UsageError(EfppError):
    """Invalid experiment specification or command line."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ReplicateFailureError(EfppError):
    """More replicates of an experiment failed than the runner tolerates."""
