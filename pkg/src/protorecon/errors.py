"""Exception hierarchy shared across the package."""


class ProtoreconError(Exception):
    """Base class for all package errors."""


class SchemaError(ProtoreconError):
    """Malformed dataset / split / feature-table file."""


class ConfigError(ProtoreconError):
    """Invalid configuration value or combination."""


class VocabularyError(ProtoreconError):
    """Token or language outside the vocabulary."""


class DimensionError(ProtoreconError):
    """Shape mismatch in a numeric operation."""


class TrainingError(ProtoreconError):
    """Non-finite loss or gradient during optimization."""


class CheckpointError(ProtoreconError):
    """Corrupt, incompatible, or mismatched checkpoint container."""
