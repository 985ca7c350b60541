"""Exception types shared across the package."""


class SkySentryError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SkySentryError):
    """Invalid configuration or scenario file; message names the file and field."""


class BehindCamera(SkySentryError):
    """Point projects behind the image plane (depth <= 0)."""


class DegenerateDisparity(SkySentryError):
    """Disparity <= 0: object at effectively infinite range."""


class OutOfDomain(SkySentryError):
    """Calibration curve evaluated or inverted outside its valid domain."""


class SingularFit(SkySentryError):
    """Normal equations rank-deficient; the fit is underdetermined."""


class OutOfRange(SkySentryError):
    """Timestamp outside the scenario duration."""


class UnknownCamera(SkySentryError):
    """Camera id not present in the scenario."""


class DimensionMismatch(SkySentryError):
    """Frames or rasters with incompatible dimensions."""


class NumericalFailure(SkySentryError):
    """Innovation covariance not invertible; filter noise setup is degenerate."""


class DegenerateLikelihood(SkySentryError):
    """All likelihood components are zero or negative."""


class MismatchedRun(SkySentryError):
    """Event log and ground truth disagree on frame identity."""


class TileDetectionError(SkySentryError):
    """Detector failed on one tile; carries the tile index."""

    def __init__(self, tile_index: int, message: str):
        super().__init__(f"tile {tile_index}: {message}")
        self.tile_index = tile_index
