"""
Error hierarchy for the sBGP toolkit.

Domain problems are ValueErrors with descriptive messages; the CLI maps them
to exit code 1 (computation failure) or 2 (usage) in main.py.
"""


class SbgpError(ValueError):
    """Base class for all toolkit errors."""


class DomainError(SbgpError):
    """Argument outside the domain of an operation."""


class ConstraintViolationError(SbgpError):
    """Infeasible (eta, xi1, xi2) triple."""


class UndefinedMomentError(SbgpError):
    """Requested moment does not exist for the marginal tail index."""


class NoJointExceedancesError(SbgpError):
    """eta(q) requested at a level with no joint exceedances."""


class StructuralError(SbgpError):
    """Network or input dimensions do not line up."""


class WeightsFormatError(SbgpError):
    """Malformed or incompatible weights file."""


class IngestionError(SbgpError):
    """Malformed input data (bad cell, duplicate date, degenerate column)."""


class UntrainedWeightsError(SbgpError):
    """Weights that never went through a training step."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss during training."""
