"""Tap-gesture user identification from motion-sensor images.

Pipeline: raw accelerometer/gyroscope channels -> fixed-length normalized
signals -> 25x150 gray-scale image -> CNN embedding -> per-user binary SVM.
"""

from .errors import FormatError, InvalidInputError, ParseError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "InvalidInputError",
    "ParseError",
    "ValidationError",
    "__version__",
]
