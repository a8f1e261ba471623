"""Exception types shared across the package."""


class RfLinkError(Exception):
    """Base class for all rflink errors."""


# --- framing ---

class PayloadTooLarge(RfLinkError):
    """Payload exceeds the 255-byte frame limit."""


class HeaderCorrupt(RfLinkError):
    """Header checksum (or SFD) mismatch; the frame is discarded."""


class Truncated(RfLinkError):
    """Fewer bits available than the frame structure requires."""


# --- modem ---

class SyncNotFound(RfLinkError):
    """Preamble correlation peak below the detection threshold."""


# --- channel ---

class ZeroSignal(RfLinkError):
    """Cannot set a finite SNR on a zero-power block."""


class NonPositiveInput(RfLinkError):
    """Distance or frequency must be strictly positive."""


class DelayTooLarge(RfLinkError):
    """Multipath tap delay exceeds the block duration."""


# --- rfchain ---

class UnknownBiasSetting(RfLinkError):
    """Bias current is not one of the discrete ladder settings."""


class CutoffAboveNyquist(RfLinkError):
    """Low-pass cutoff at or above half the sample rate."""


class ProbeTooStrong(RfLinkError):
    """Two-tone probe power too close to the configured IIP3."""


class CalibrationInfeasible(RfLinkError):
    """No monotone noise-figure ladder can reach the requested targets."""


# --- metrics ---

class LengthMismatch(RfLinkError):
    """Compared sequences must have equal length."""


class EmptyInput(RfLinkError):
    """Metric requires at least one record."""


# --- tuner ---

class NoFeasibleSetting(RfLinkError):
    """Every ladder setting fails the performance target."""


# --- io ---

class ParseError(RfLinkError):
    """Malformed scenario or waveform file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(RfLinkError):
    """Well-formed file with an invalid or unknown key/value."""


class NonMonotoneTime(RfLinkError):
    """PWL time column must be strictly increasing."""


class RateTooLow(RfLinkError):
    """Passband export rate insufficient for the carrier."""


class IoError(RfLinkError):
    """File could not be read or written."""
