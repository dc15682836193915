"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions are incompatible with the requested operation."""


class DomainError(ValueError):
    """A scalar argument lies outside its admissible range."""


class NumericError(ArithmeticError):
    """Non-finite input or a failed decomposition."""


class StateError(RuntimeError):
    """An object is not in a state that allows the operation."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``line`` is the 1-based line of the offending entry when the source was
    a file, otherwise ``None``.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class TrainingDiverged(ArithmeticError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch, last_finite_loss):
        self.epoch = epoch
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"loss became non-finite in epoch {epoch} "
            f"(last finite loss {last_finite_loss!r})"
        )
