"""Exception hierarchy shared by all miaudit modules."""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AuditError):
    """File header magic or version is not recognized."""


class TruncationError(AuditError):
    """File payload is shorter than its header declares."""


class DataError(AuditError):
    """Ingested data contains non-finite or otherwise invalid values."""


class IoError(AuditError):
    """Underlying I/O operation failed."""


class EmptyMatrixError(AuditError):
    """A matrix operation received an empty matrix."""


class DuplicateIdError(AuditError):
    """Record identifiers are not unique."""


class DimError(AuditError):
    """Dimension mismatch between operands."""


class RankError(AuditError):
    """Input matrix has too few nonzero eigenvalues for the requested fit."""


class EmptyInputError(AuditError):
    """An aggregate was requested over empty inputs."""


class ImbalanceError(AuditError):
    """Record sets under audit do not have the required sizes."""


class IdMismatchError(AuditError):
    """A reconstruction batch targets a different record id."""


class ConfigError(AuditError):
    """Invalid configuration of a synthetic generator or attack."""


class OracleError(AuditError):
    """A reconstruction oracle failed for a record."""

    def __init__(self, record_id, message=""):
        self.record_id = record_id
        super().__init__(f"oracle failed for record {record_id!r}: {message}")


class InsufficientDataError(AuditError):
    """A trial data provider ran out of data."""
