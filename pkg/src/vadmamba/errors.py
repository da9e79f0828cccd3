"""Exception types raised across the package."""


class VadmError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(VadmError, ValueError):
    pass


class InvalidAttr(VadmError, ValueError):
    pass


class DtypeMismatch(VadmError, TypeError):
    pass


class NotScalar(VadmError, ValueError):
    pass


class DetachedTensor(VadmError, RuntimeError):
    pass


class MissingGrad(VadmError, RuntimeError):
    pass


class NonpositiveDelta(VadmError, ValueError):
    pass


class DimMismatch(ShapeMismatch):
    pass


class EmptyCodebook(VadmError, ValueError):
    pass


class Indivisible(ShapeMismatch):
    pass


class OddExtent(ShapeMismatch):
    pass


class OddChannels(ShapeMismatch):
    pass


class ConfigMismatch(VadmError, ValueError):
    pass


class TooSmall(ShapeMismatch):
    pass


class EmptySeries(VadmError, ValueError):
    pass


class InvalidSigma(VadmError, ValueError):
    pass


class LengthMismatch(VadmError, ValueError):
    pass


class Misalignment(LengthMismatch):
    pass


class BadResolution(VadmError, ValueError):
    pass


class TooShort(VadmError, ValueError):
    pass


class CorruptFile(VadmError, IOError):
    pass


class MissingComponent(VadmError, FileNotFoundError):
    pass


class EmptyDataset(VadmError, ValueError):
    pass


class CheckpointMismatch(VadmError, ValueError):
    pass


class MalformedCsv(VadmError, ValueError):
    pass


class IncompatibleCheckpoint(CheckpointMismatch):
    pass


class MissingData(VadmError, FileNotFoundError):
    pass


class NumericFailure(VadmError, FloatingPointError):
    """Raised when a training loss becomes NaN or infinite."""


class LabelLeak(VadmError, ValueError):
    """Raised when a training split contains anomalous frames."""
