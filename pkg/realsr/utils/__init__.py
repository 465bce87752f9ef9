"""Utility modules for realsr."""

from .exceptions import (
    CheckpointError,
    ConfigurationError,
    DataIOError,
    DatasetError,
    DivisibilityError,
    NonFiniteError,
    OverlapError,
    PluginError,
    RealSRError,
    ShapeMismatchError,
    TrainingDivergedError,
    UsageError,
    ValidationError,
)
from .helpers import (
    default_workers,
    format_file_size,
    list_images,
    sanitize_filename,
    sha256_file,
    zero_padded_name,
)
from .subcommands import show_subcommands

__all__ = [
    'RealSRError',
    'UsageError',
    'DataIOError',
    'ValidationError',
    'ConfigurationError',
    'DivisibilityError',
    'ShapeMismatchError',
    'NonFiniteError',
    'OverlapError',
    'DatasetError',
    'CheckpointError',
    'PluginError',
    'TrainingDivergedError',
    'default_workers',
    'format_file_size',
    'list_images',
    'sanitize_filename',
    'sha256_file',
    'zero_padded_name',
    'show_subcommands',
]
