"""Exception types shared across the package."""


class SoundlensError(Exception):
    """Base class for domain errors."""


class AudioFormatError(SoundlensError, ValueError):
    """Unsupported or malformed audio input."""


class ConfigError(SoundlensError, ValueError):
    """Invalid or inconsistent configuration."""


class InputError(SoundlensError, ValueError):
    """Missing or malformed input data (files, manifests, annotations)."""


class TrainingDiverged(SoundlensError, RuntimeError):
    """Loss became non-finite during optimization."""
