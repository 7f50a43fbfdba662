"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class InvalidStateError(RuntimeError):
    """An object was used out of sequence, e.g. a stale forward cache."""


class FormatError(ValueError):
    """A binary container failed validation.

    ``field`` names the header field or tensor that was rejected.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch, batch, loss, history):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch} "
            f"(epoch history: {list(history)})"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        self.history = list(history)
