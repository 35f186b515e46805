class RegistrationError(Exception):
    """Base class for frame realignment failures"""


class DegenerateInput(RegistrationError):
    """Too few positively weighted pairs, or coincident source points"""


class NoCorrespondences(RegistrationError):
    """ICP found no landmark pair within the rejection radius"""
