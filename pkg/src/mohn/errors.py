"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable contract: 1 numeric failure, 2 usage/config error, 3 I/O error.
"""


class MohnError(Exception):
    exit_code = 1


class UsageError(MohnError, ValueError):
    exit_code = 2


class ZeroNorm(MohnError, ValueError):
    """Vector norm at or below the zero-norm threshold."""


class DimensionMismatch(UsageError):
    pass


class EmptyInput(UsageError):
    pass


class InvalidSpec(UsageError):
    pass


class StaleCache(MohnError, ValueError):
    """Backward called with a cache that does not match the parameters."""


class InvalidCapacity(UsageError):
    pass


class BatchTooLarge(UsageError):
    pass


class IndivisibleCapacity(UsageError):
    pass


class NotNormalized(MohnError, ValueError):
    pass


class InvalidSubsetSize(UsageError):
    pass


class InvalidShape(UsageError):
    pass


class InvalidImage(UsageError):
    pass


class EmptyBatch(UsageError):
    pass


class ShapeMismatch(UsageError):
    pass


class ConfigInvalid(UsageError):
    pass


class KTooLarge(UsageError):
    pass


class EmptyIndex(UsageError):
    pass


class IoFailure(MohnError, OSError):
    exit_code = 3


class MissingFile(IoFailure):
    pass


class TruncatedRecord(IoFailure):
    pass


class LabelOutOfRange(IoFailure):
    pass


class CorruptCheckpoint(IoFailure):
    pass


class VersionMismatch(IoFailure):
    pass
