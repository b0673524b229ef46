"""Exception types shared across the engine."""


class VizlensError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFormat(VizlensError):
    """Input bytes are not a PNG or JPEG stream."""


class DecodeError(VizlensError):
    """Input claims a supported format but cannot be decoded."""


class DimensionMismatch(VizlensError):
    """Two pixel grids that must align have different dimensions."""


class NonFiniteInput(VizlensError):
    """A scalar field contains NaN or infinity."""


class InvalidAmount(VizlensError):
    """Adjustment amount is outside the legal range for its kind."""


class DuplicateId(VizlensError):
    """A filter id is already present in the registry."""


class DuplicateSection(VizlensError):
    """More than one enabled filter claims the same canonical section."""


class NoFiltersEnabled(VizlensError):
    """A pipeline run was requested with every filter disabled."""


class SpawnError(VizlensError):
    """An external plugin process could not be started."""


class PluginTimeout(VizlensError):
    """An external plugin did not answer within its time budget."""


class ProtocolError(VizlensError):
    """An external plugin sent a malformed response."""


class PluginReportedError(VizlensError):
    """An external plugin answered with its own error message."""


class AllZeroMap(VizlensError):
    """A heatmap with no positive mass where one is required."""


class StoreIo(VizlensError):
    """The report store could not be read or written."""


class NotFound(VizlensError):
    """A report, image, or job id does not exist."""


class UnknownSection(VizlensError):
    """A section identifier is not part of the report."""


class ConfigError(VizlensError):
    """The configuration file is missing or inconsistent."""
