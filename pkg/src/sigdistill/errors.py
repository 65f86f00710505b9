"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class ParseError(ValueError):
    """A SIGDS file or a config file could not be decoded."""


class TrainingDiverged(RuntimeError):
    """An optimization loop produced a non-finite loss."""
