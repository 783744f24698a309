"""Exception types shared across the toolkit."""


class AcslmError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedRateError(AcslmError, ValueError):
    """Sample rate outside the supported design range."""


class RateMismatchError(AcslmError, ValueError):
    """Signal and filter sample rates differ."""


class CalibrationError(AcslmError, ValueError):
    """Calibration reference rejected (too short, wrong tone, unstable)."""


class DesignError(AcslmError, ValueError):
    """Filter design could not meet its target.

    ``achieved_ripple_db`` carries the realized in-band error when the
    failure is a tolerance miss.
    """

    def __init__(self, message, achieved_ripple_db=None):
        super().__init__(message)
        self.achieved_ripple_db = achieved_ripple_db


class CodecError(AcslmError, ValueError):
    """Segment encoding or decoding failed (includes checksum mismatch)."""


class EnvelopeError(AcslmError, ValueError):
    """Envelope sealing/opening failed (wrong key, tampering, bad layout)."""


class BacklogError(AcslmError, ValueError):
    """Backlog store rejected an operation."""


class TransportError(AcslmError, IOError):
    """Simulated or real transport failure; the exchange did not complete."""


class ConformanceError(AcslmError, ValueError):
    """Conformance battery misuse (uncalibrated pipeline, bad bounds)."""
