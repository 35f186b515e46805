class EvaluationError(Exception):
    """Base class for evaluation failures"""


class EmptyGroundTruth(EvaluationError):
    """MOTA is undefined when no ground-truth object was ever present"""


class RunLogError(EvaluationError):
    """A run log directory is missing a table or a table is corrupt; the message names the table"""
