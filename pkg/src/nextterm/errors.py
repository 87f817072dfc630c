"""Exception types shared across the package."""


class UnknownGradeError(ValueError):
    """Raised when a grade symbol is not on the letter ladder."""


class IngestionError(ValueError):
    """Raised when a CSV row cannot be ingested; carries the row number."""

    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class ProtocolError(ValueError):
    """Raised when a split/evaluation precondition is violated."""


class ConfigError(ValueError):
    """Raised for infeasible or malformed configuration."""


class UnknownStudentError(LookupError):
    """Raised when a student id cannot be resolved in a dataset."""


class TrainingDivergedError(RuntimeError):
    """Raised when a non-finite value appears during SGD."""

    def __init__(self, epoch, record_index):
        super().__init__(
            f"non-finite value during epoch {epoch} at record {record_index}"
        )
        self.epoch = epoch
        self.record_index = record_index
