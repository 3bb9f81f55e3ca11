class PrunerError(Exception):
    """Base class for every error raised by joint_pruner."""


class InvalidArgumentError(PrunerError, ValueError):
    """An argument has the wrong shape, length or range."""


class NumericalFaultError(PrunerError, ArithmeticError):
    """A loss, head output or gradient became non-finite."""


class VersionMismatchError(PrunerError):
    """A document carries an unknown or missing schema string."""

    def __init__(self, expected: str, found):
        self.expected = expected
        self.found = found
        super().__init__(f"Unsupported document version {found!r}, expected {expected!r}")


class ConfigError(PrunerError):
    """The experiment configuration is malformed."""


class EvaluationError(PrunerError):
    """An evaluator could not score a pruning action."""


class SearchAbortedError(PrunerError):
    """The search stopped early; `records` holds the episodes completed so far."""

    def __init__(self, message: str, records: list):
        self.records = records
        super().__init__(message)
