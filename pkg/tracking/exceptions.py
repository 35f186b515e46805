class TrackingError(Exception):
    """Base class for numeric failures in the tracking pipeline"""


class SingularInnovation(TrackingError):
    """Innovation covariance H P Hᵀ + R is not invertible"""


class SingularCovariance(TrackingError):
    """Measurement covariance cannot be inverted into information form"""


class SingularGain(TrackingError):
    """P⁻¹ + Y is not invertible"""
