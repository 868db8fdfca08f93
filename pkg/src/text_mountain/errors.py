"""Exception hierarchy shared by every text_mountain module."""


class TextMountainError(Exception):
    """Base class for all errors raised by text_mountain."""


class GeometryError(TextMountainError, ValueError):
    """Raised for degenerate sides, segments or polygons."""


class ConfigError(TextMountainError, ValueError):
    """Raised when a configuration value is outside its valid range."""


class MapFormatError(TextMountainError, ValueError):
    """Raised when a TMM1 map container cannot be decoded."""


class AnnotationError(TextMountainError, ValueError):
    """Raised when an annotation file or polygon cannot be used."""
