"""Exception types shared across the package."""


class LidarPlaceError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(LidarPlaceError, ValueError):
    """A value object violates its invariants (bad ROI, spec, or params)."""


class UnsupportedTransformError(LidarPlaceError, ValueError):
    """A frame transform was requested that yaw-only boxes cannot represent."""


class ParseError(LidarPlaceError, ValueError):
    """A text input (placement file, label file, CSV) failed to parse.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class FormatError(LidarPlaceError, ValueError):
    """A binary artifact (POG file) is malformed, truncated, or mismatched."""
