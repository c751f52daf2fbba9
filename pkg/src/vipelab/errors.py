"""Exception and warning types raised across vipelab."""


class VipeError(Exception):
    """Base class for all library errors."""


class DimensionError(VipeError, ValueError):
    pass


class DegeneratePoseError(VipeError, ValueError):
    pass


class AlignmentDegenerateError(DegeneratePoseError):
    """Hip/spine triad does not pin down a unique rotation (cross-covariance rank < 2)."""


class DegenerateBoneError(DegeneratePoseError):
    pass


class ProjectionError(VipeError, ValueError):
    """A joint lies at or behind the camera plane."""


class MiningError(VipeError, ValueError):
    pass


class CheckpointCorruptError(VipeError, IOError):
    pass


class FrozenDecoderError(VipeError, RuntimeError):
    """The decoder parameters changed while they were supposed to stay frozen."""


class TrainingError(VipeError, RuntimeError):
    pass


class ConfigError(VipeError, ValueError):
    pass


class DatasetError(VipeError, IOError):
    pass


class NonCanonicalInputWarning(UserWarning):
    pass


class TruncatedQueryWarning(UserWarning):
    """k exceeded the index size; all entries were returned."""


class DegenerateProjectionWarning(UserWarning):
    pass
