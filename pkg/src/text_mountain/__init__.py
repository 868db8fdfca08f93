"""TextMountain - ground-truth maps, losses and mountain-climbing grouping for text detection."""

__version__ = "0.1.0"
