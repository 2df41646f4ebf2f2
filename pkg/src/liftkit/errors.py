"""Exception types shared across the toolkit.

``LiftError`` marks failures in data, files, or runtime processing; plain
``ValueError``/``TypeError`` are reserved for programming errors (bad call
arguments). The CLI maps ``LiftError`` to exit code 1 and usage problems to
exit code 2.
"""


class LiftError(Exception):
    """Base class for all toolkit-specific failures."""


class ParseError(LiftError):
    """A file could not be parsed; the message names the offending line."""


class SchemaError(LiftError):
    """A record parsed but violates the declared file schema."""


class ValidationError(LiftError):
    """A value violates a domain invariant (non-finite coordinate, bad fps, ...)."""


class FormatError(LiftError):
    """A binary file has the wrong magic or a corrupt header."""


class DurationError(LiftError):
    """A motion is too long for the target image width."""


class NormalizationError(LiftError):
    """A raw label normalized to the empty word list."""


class ConversionError(LiftError):
    """Keypoint-layout conversion failed (missing landmark, bad mapping)."""


class TrainingError(LiftError):
    """Training aborted (non-finite gradient, divergence)."""
