"""Exception hierarchy shared across the toolkit.

File-format problems derive from OSError so callers can treat them like
ordinary I/O failures; contract violations derive from ValueError.
"""


class CellsegError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormatError(CellsegError, OSError):
    """File magic or pixel layout is not one we read (e.g. color PNG)."""


class CorruptFileError(CellsegError, OSError):
    """Recognized container with an unreadable payload (truncation, junk)."""


class DimensionOverflowError(CellsegError, OSError):
    """Header declares more pixels than we are willing to address."""


class SampleRangeError(CellsegError, ValueError):
    """Sample values cannot be represented in the requested on-disk format."""


class LabelOverflowError(CellsegError, ValueError):
    """Label id too large for the requested on-disk format."""


class DimensionMismatchError(CellsegError, ValueError):
    """Two images that must share dimensions do not."""


class EmptyStackError(CellsegError, ValueError):
    """A z-stack needs at least one plane."""


class MarkerExceedsMaskError(CellsegError, ValueError):
    """Reconstruction marker is above the mask somewhere."""


class NegativeHError(CellsegError, ValueError):
    """h-maxima depth must be non-negative."""


class SeedOutsideMaskError(CellsegError, ValueError):
    """Watershed seed pixel falls outside the flooding mask."""


class ConstantImageError(CellsegError, ValueError):
    """Pearson correlation is undefined for a zero-variance image."""


class ThresholdTooLowError(CellsegError, ValueError):
    """Instance matching requires an IoU threshold of at least 0.5."""


class EmptyInputError(CellsegError, ValueError):
    """An aggregation needs at least one record."""


class CropTooLargeError(CellsegError, ValueError):
    """Requested crop size exceeds the source image."""


class BadCountError(CellsegError, ValueError):
    """Requested partition size is impossible."""


class PlacementFailureError(CellsegError, RuntimeError):
    """Synthetic generator could not place the requested instances."""
