"""
Exception types shared across the toolkit
"""


class WCamNetError(Exception):
    """Base class for all toolkit errors"""


class ConfigError(WCamNetError):
    """Invalid or inconsistent configuration"""


# ============ Model core ============

class BackboneUnavailableError(WCamNetError):
    """Backbone weights could not be resolved or loaded"""


class ShapeError(WCamNetError, ValueError):
    """Tensor shape does not match the expected contract"""


class RegistryError(WCamNetError, KeyError):
    """Unknown architecture name"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown architecture"


class CheckpointMismatchError(WCamNetError):
    """Checkpoint does not match the model configuration or schema"""


# ============ Dataset ============

class InvalidReadingError(WCamNetError, ValueError):
    """Grip reading that cannot be converted (e.g. non-finite)"""


class MissingReadingError(WCamNetError):
    """No sensor readings available where at least one is required"""


class PairingConfigError(ConfigError):
    """Camera station missing from the station pairing table"""


class SplitError(WCamNetError):
    """Station-grouped split cannot be produced"""


class EmptySplitError(ConfigError):
    """A split required for training or evaluation has no samples"""


class ImageDecodeError(WCamNetError):
    """Image file is corrupt or undecodable"""

    def __init__(self, image_ref: str, reason: str):
        super().__init__(f"Could not decode image {image_ref}: {reason}")
        self.image_ref = image_ref


# ============ Ingestion ============

class PayloadValidationError(WCamNetError):
    """Payload from the roadside service failed validation"""


class ArchiveError(WCamNetError):
    """Archive directory is unusable or a record would be overwritten"""


class SourceUnavailableError(WCamNetError):
    """Simulated roadside source is configured to fail for an id"""


# ============ Training ============

class TrainingDivergedError(WCamNetError):
    """Loss became non-finite during training"""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message} | {diagnostics}")
        self.diagnostics = diagnostics


class GridSearchError(WCamNetError):
    """Every grid-search cell failed"""

    def __init__(self, message: str, reports: list):
        super().__init__(message)
        self.reports = reports
