"""Exception types raised across the package."""


class IonPhaseError(Exception):
    """Base class for all package errors."""


class UnstableChainError(IonPhaseError):
    """The linear chain has a non-positive mode eigenvalue."""

    def __init__(self, message, critical_ratio=None):
        super().__init__(message)
        self.critical_ratio = critical_ratio


class NonFiniteInputError(IonPhaseError, ValueError):
    pass


class UnphysicalStateError(IonPhaseError):
    """A covariance matrix violates the uncertainty relation."""


class NonPositiveFactorError(IonPhaseError, ValueError):
    pass


class SingularMatrixError(IonPhaseError):
    pass


class InconsistentDataError(IonPhaseError):
    """Fitted scan parameters disagree with the measured phonon number."""
