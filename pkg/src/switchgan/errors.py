"""Exception types shared across the toolkit."""


class SwitchGANError(Exception):
    """Base class for all toolkit errors.

    ``code`` is an optional machine-readable tag used by the HTTP service.
    """

    def __init__(self, *args, code: str | None = None):
        super().__init__(*args)
        self.code = code


class SchemaViolation(SwitchGANError):
    """A label or attribute assignment breaks the schema rules."""


class LengthMismatch(SwitchGANError):
    """Vector arguments disagree on length."""


class ShapeMismatch(SwitchGANError):
    """Tensor arguments disagree on shape."""


class EmptyBatch(SwitchGANError):
    """An operation that needs at least one sample received none."""


class GateDisabled(SwitchGANError):
    """A gate-only operation was called on an ungated model."""


class MissingTerm(SwitchGANError):
    """A loss term with a non-zero weight was not supplied."""


class RangeError(SwitchGANError):
    """A scalar argument is outside its documented range."""


class InvalidSpec(SwitchGANError):
    """A dataset generation spec is malformed."""


class ParseError(SwitchGANError):
    """An attribute list file does not follow the expected grammar."""


class MissingImage(SwitchGANError):
    """An attribute list row names an image file that does not exist."""


class CheckpointIOError(SwitchGANError):
    """A checkpoint could not be read or written."""


class FormatError(SwitchGANError):
    """A checkpoint file is structurally invalid or inconsistent."""


class DimensionMismatch(SwitchGANError):
    """Feature moments of different dimensionality cannot be compared."""


class NumericalFailure(SwitchGANError):
    """A numerical routine did not converge or produced invalid output."""


class InsufficientSamples(SwitchGANError):
    """Too few samples to estimate the requested statistic."""
