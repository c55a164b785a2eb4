"""Exception hierarchy shared by every module."""


class DRError(ValueError):
    """Base class for all errors raised by drrisk."""

    tag = "dr-error"


class InvalidParameterError(DRError):
    tag = "invalid-parameter"


class InvalidDataError(DRError):
    tag = "invalid-data"


class MLEOutsideDomainError(DRError):
    """The unconstrained maximum likelihood estimate is not in the family domain."""

    tag = "mle-outside-domain"

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


class UnsupportedCombinationError(DRError):
    tag = "unsupported-combination"


class EmptyAdmissibleSetError(DRError):
    tag = "empty-admissible-set"


class OracleFailureError(DRError):
    tag = "oracle-failure"


class InvalidInputError(DRError):
    tag = "invalid-input"
