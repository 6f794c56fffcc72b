"""Exception types raised across the toolkit."""


class GncError(Exception):
    """Base class for all toolkit errors."""


class ZeroAxisError(GncError):
    """Rotation axis has (near-)zero norm but a nonzero angle was requested."""


class DegenerateMatrixError(GncError):
    """Matrix cannot be projected onto SO(3) (det <= 0)."""


class SingularInertiaError(GncError):
    """Inertia matrix is not invertible."""


class SingularInnovationError(GncError):
    """Innovation covariance is numerically singular."""


class ZeroRateError(GncError):
    """Measured rate vector has zero norm."""


class RankDeficientError(GncError):
    """Least-squares normal matrix is rank deficient."""


class TooFewSamplesError(GncError):
    """Not enough samples for the requested statistic."""


class NoRampEndError(GncError):
    """Reference profile never reaches the target rate."""


class UnsettledError(GncError):
    """Trace never permanently enters the settling band."""


class WindowTooShortError(GncError):
    """Analysis window contains too few samples."""


class ConfigError(GncError):
    """Configuration document failed to parse or validate."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
