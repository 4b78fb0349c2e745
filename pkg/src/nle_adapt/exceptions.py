"""Exception hierarchy shared by every module."""


class NLEError(Exception):
    """Base class for all errors raised by nle_adapt."""


class InputShapeError(NLEError, ValueError):
    """Array shapes do not agree with each other or with a network."""


class NumericDomainError(NLEError, ValueError):
    """Probabilities are negative, non-finite, or not row-normalized."""


class PreconditionError(NLEError, ValueError):
    """An operation was called with inputs outside its contract."""


class DivergenceError(NLEError, RuntimeError):
    """Training produced a non-finite loss or non-finite parameters."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class MissingEmbeddingError(NLEError, LookupError):
    """A label has no l-vector in the codebook."""

    def __init__(self, labels, num_classes=None):
        self.labels = sorted(int(c) for c in labels)
        msg = "no embedding for class(es) " + ", ".join(map(str, self.labels))
        if num_classes is not None:
            msg += f" (codebook has {num_classes} classes)"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class PairingError(NLEError, ValueError):
    """Teacher/student inputs are not aligned frame by frame."""


class ConfigError(NLEError, ValueError):
    """An experiment configuration failed validation."""
