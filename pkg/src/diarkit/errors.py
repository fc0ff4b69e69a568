"""Shared exception types.

Every toolkit-specific failure subclasses DiarkitError so callers can catch
one base; each also subclasses the closest builtin (ValueError, IndexError)
to stay idiomatic. File-not-found and OS-level failures use the builtins
FileNotFoundError / OSError directly.
"""


class DiarkitError(Exception):
    pass


class ClippedWarning(UserWarning):
    """Normalization had to clamp samples into [-1, 1]."""


# ---- audio_io ----

class CorruptHeader(DiarkitError, ValueError):
    pass


class UnsupportedFormat(DiarkitError, ValueError):
    pass


class EmptyBuffer(DiarkitError, ValueError):
    pass


class RttmParseError(DiarkitError, ValueError):
    """Base for RTTM text failures; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedLine(RttmParseError):
    pass


class NonNumericTime(RttmParseError):
    pass


class NonPositiveDuration(RttmParseError):
    pass


# ---- dsp_preprocess ----

class SilentInput(DiarkitError, ValueError):
    pass


class LengthMismatch(DiarkitError, ValueError):
    pass


class TooShort(DiarkitError, ValueError):
    pass


# ---- embed ----

class SegmentOutOfRange(DiarkitError, ValueError):
    pass


class TooFewFrames(DiarkitError, ValueError):
    pass


class DimMismatch(DiarkitError, ValueError):
    pass


class TruncatedFile(DiarkitError, ValueError):
    pass


# ---- cluster ----

class ZeroVector(DiarkitError, ValueError):
    pass


class EmptyInput(DiarkitError, ValueError):
    pass


class KTooLarge(DiarkitError, ValueError):
    pass


# ---- metrics ----

class EmptyMatrix(DiarkitError, ValueError):
    pass


class MixedFiles(DiarkitError, ValueError):
    pass


class EmptyReference(DiarkitError, ValueError):
    pass


class EmptyScores(DiarkitError, ValueError):
    pass


class ZeroBaseline(DiarkitError, ValueError):
    pass


# ---- losses ----

class IndexOutOfRange(DiarkitError, IndexError):
    pass


class ImpossibleAlignment(DiarkitError, ValueError):
    pass


class UnnormalizedRow(DiarkitError, ValueError):
    pass


class LabelOutOfRange(DiarkitError, ValueError):
    pass


class EmptyData(DiarkitError, ValueError):
    pass


# ---- corpus ----

class BadSpeakerCount(DiarkitError, ValueError):
    pass


class BadSplit(DiarkitError, ValueError):
    pass


class IoError(DiarkitError, OSError):
    """Filesystem failure while writing or reading corpus artifacts."""
