"""Exception hierarchy shared across the package."""


class SDSNError(Exception):
    """Base class for every error raised by :mod:`sdsn`."""


class ConfigError(SDSNError):
    """Invalid hyperparameters or run configuration."""


class NonDivisible(ConfigError):
    def __init__(self, hidden, groups):
        self.hidden = hidden
        self.groups = groups
        super().__init__(f"NonDivisible: {groups} groups do not divide {hidden} hidden units")


class DataError(SDSNError):
    """Problems with input data, files, or model/data compatibility."""


class LabelOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimMismatch(DataError):
    def __init__(self, message, layer=None, expected=None, found=None):
        self.layer = layer
        self.expected = expected
        self.found = found
        where = f" at layer {layer}" if layer is not None else ""
        detail = f" (expected {expected}, found {found})" if expected is not None else ""
        super().__init__(f"DimMismatch{where}: {message}{detail}")


class InvariantViolation(DataError):
    def __init__(self, invariant, layer=None):
        self.invariant = invariant
        self.layer = layer
        where = f" at layer {layer}" if layer is not None else ""
        super().__init__(f"InvariantViolation({invariant}){where}")


class ParseError(DataError):
    pass


class NonFinite(DataError):
    pass


class ShapeError(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


class VersionUnsupported(DataError):
    pass


class InsufficientExamples(DataError):
    def __init__(self, cls, available, requested):
        self.cls = cls
        super().__init__(
            f"InsufficientExamples: class {cls} has {available} examples, "
            f"cannot take {requested} for training and leave a test set"
        )


class SingularSystem(SDSNError):
    pass


class DivergedTraining(SDSNError):
    def __init__(self, layer, epoch, value, what="objective"):
        self.layer = layer
        self.epoch = epoch
        self.value = value
        super().__init__(
            f"DivergedTraining: {what} {value!r} at layer {layer}, epoch {epoch} "
            "(learning rate too large?)"
        )


class KinkAvoidanceFailed(SDSNError):
    pass
