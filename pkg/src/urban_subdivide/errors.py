"""Exception hierarchy.

Every rejected input maps to exactly one named error class.  The ``code``
attribute is the stable machine-readable name surfaced by the CLI; the
``exit_code`` groups errors into the CLI exit conventions (2 validation,
3 statistical degeneracy, 4 I/O).
"""

from __future__ import annotations

__all__ = [
    "UrbanSubdivideError",
    "InputError",
    "DegeneracyError",
    "MissingPropertyError",
    "InvalidPolygonError",
    "DuplicateCellIdError",
    "OverlappingCellsError",
    "GeographicCrsError",
    "UnknownCellError",
    "UnknownGroupError",
    "NegativeCountError",
    "MisalignedPeriodError",
    "SubgroupExceedsTotalError",
    "UnknownCategoryError",
    "EmptyWindowError",
    "DegenerateFieldError",
    "TooFewCellsError",
    "EmptySampleError",
    "NoSpotsError",
    "InvalidSpecError",
    "ConfigError",
    "PipelineError",
]


class UrbanSubdivideError(Exception):
    """Base class for all package errors."""

    code = "Error"
    exit_code = 1


class InputError(UrbanSubdivideError):
    """Malformed input data or configuration."""

    exit_code = 2


class DegeneracyError(UrbanSubdivideError):
    """Input is well formed but statistically unusable."""

    exit_code = 3


class MissingPropertyError(InputError):
    """A required property or column is absent or has an invalid value."""

    code = "MissingProperty"


class InvalidPolygonError(InputError):
    """Geometry is not a valid polygon with positive area."""

    code = "InvalidPolygon"


class DuplicateCellIdError(InputError):
    code = "DuplicateCellId"


class OverlappingCellsError(InputError):
    """Two cell interiors overlap beyond tolerance."""

    code = "OverlappingCells"


class GeographicCrsError(InputError):
    """File declares a geographic (degree) CRS; areas need a projected one."""

    code = "GeographicCrs"


class UnknownCellError(InputError):
    code = "UnknownCell"


class UnknownGroupError(InputError):
    code = "UnknownGroup"


class NegativeCountError(InputError):
    """Count is negative or not an integer."""

    code = "NegativeCount"


class MisalignedPeriodError(InputError):
    """Timestamp does not start a four-hour bin."""

    code = "MisalignedPeriod"


class SubgroupExceedsTotalError(InputError):
    """Subgroup counts are inconsistent with the reported total."""

    code = "SubgroupExceedsTotal"


class UnknownCategoryError(InputError):
    code = "UnknownCategory"


class EmptyWindowError(DegeneracyError):
    """No observation period falls inside the requested time window."""

    code = "EmptyWindow"


class DegenerateFieldError(DegeneracyError):
    """Field has zero variance or too few defined values to standardize."""

    code = "DegenerateField"


class TooFewCellsError(DegeneracyError):
    code = "TooFewCells"


class EmptySampleError(DegeneracyError):
    code = "EmptySample"


class NoSpotsError(DegeneracyError):
    """A comparison needs both hot and cold cells and one side is empty."""

    code = "NoSpots"


class InvalidSpecError(InputError):
    code = "InvalidSpec"


class ConfigError(InputError):
    code = "Config"


class PipelineError(UrbanSubdivideError):
    """Wraps a stage failure so callers can attribute it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 4 if isinstance(cause, OSError) else 1)
