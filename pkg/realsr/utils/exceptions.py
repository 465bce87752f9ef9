"""Custom exceptions for realsr."""


class RealSRError(Exception):
    """Base exception for realsr errors."""

    exit_code = 1


class UsageError(RealSRError):
    """Raised when command-line arguments are missing or inconsistent."""

    exit_code = 2


class DataIOError(RealSRError):
    """Raised when reading or writing images, manifests or checkpoints fails."""

    exit_code = 3


class ValidationError(RealSRError):
    """Raised when input validation fails."""

    exit_code = 4


class ConfigurationError(ValidationError):
    """Raised when there's a configuration issue."""
    pass


class DivisibilityError(ValidationError):
    """Raised when image dimensions are not divisible by a required factor."""
    pass


class ShapeMismatchError(ValidationError):
    """Raised when two tensors that must agree in shape do not."""
    pass


class NonFiniteError(ValidationError):
    """Raised when a tensor contains NaN or infinite values."""
    pass


class OverlapError(ValidationError):
    """Raised when train and eval sources share images."""
    pass


class DatasetError(ValidationError):
    """Raised when a manifest or dataset cannot serve the requested stage."""
    pass


class CheckpointError(ValidationError):
    """Raised when a checkpoint is malformed or does not match the runtime."""
    pass


class PluginError(RealSRError):
    """Raised when a perceptual metric plugin cannot be loaded or fails."""
    pass


class TrainingDivergedError(RealSRError):
    """Raised when a training loss becomes non-finite."""

    def __init__(self, message: str, last_good: object = None):
        super().__init__(message)
        self.last_good = last_good
