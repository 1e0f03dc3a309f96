"""Exception types shared across the package."""


class GimbalLock(ValueError):
    """Pitch is too close to +-90 deg for the Euler-rate map to exist."""


class DegeneratePatch(ValueError):
    """Triangle patch has a near-zero edge, angles are undefined."""


class InsufficientSamples(ValueError):
    """Not enough inclination samples to fit a model."""


class NonPositiveInnovationCovariance(ValueError):
    """Innovation covariance failed its Cholesky factorization twice."""


class NoCorrespondences(RuntimeError):
    """Every candidate pair was rejected by the correspondence gate."""


class DegenerateConfiguration(ValueError):
    """Point pairs are too few, coincident or collinear for a rigid fit."""


class EmptyMarkers(ValueError):
    """Error statistics requested with no marker times."""
