"""Exception hierarchy shared across the package."""


class HaifitError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(HaifitError):
    """Tensor shape or resolution does not match what an operation requires."""


class ChannelCountError(ShapeError):
    """Image does not have the expected number of channels."""


class ScheduleError(HaifitError):
    """Resolution schedule is malformed (non-doubling, wrong endpoints)."""


class SequenceError(HaifitError):
    """Sequence decomposition has the wrong number of parts."""


class ProtocolError(HaifitError):
    """Pyramid levels were invoked out of order or with missing inputs."""


class GrowthError(HaifitError):
    """Attempted to grow a model that is already at the finest resolution."""


class ConfigError(HaifitError):
    """Invalid configuration value."""


class PairingError(HaifitError):
    """Dataset sketch/photo files do not pair up."""


class SampleCountError(HaifitError):
    """Too few samples for a statistical estimate."""


class NumericalError(HaifitError):
    """A numerical routine left its stated tolerance envelope."""


class CheckpointError(HaifitError):
    """Checkpoint file is malformed or incompatible."""
