"""Exception types shared across the package."""


class ClinFusionError(Exception):
    """Base class for all package errors."""


class DimensionError(ClinFusionError, ValueError):
    pass


class DomainError(ClinFusionError, ValueError):
    pass


class TrainingError(ClinFusionError, RuntimeError):
    pass


class DataError(ClinFusionError, ValueError):
    pass


class ConfigError(ClinFusionError, ValueError):
    """Invalid configuration. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MetricError(ClinFusionError, ValueError):
    pass


class ProtocolError(ClinFusionError, RuntimeError):
    pass
