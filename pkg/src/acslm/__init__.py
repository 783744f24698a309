"""acslm: a software sound level meter and acoustic sensor-node toolkit.

Subpackages cover the calibrated metering chain (weighting, meter,
pipeline), a virtual microphone front end (micmodel), response measurement
and equalization (sweep, compensation), an IEC 61672-3 style conformance
battery (conformance) and the encrypt-and-upload telemetry path (nodenet).
"""

__version__ = "0.1.0"

from .audio import SampleBuffer, read_wav, write_wav
from .meter import FAST, SLOW, CalibrationState, SplSeries, calibrate, exponential_detector, leq
from .pipeline import SlmPipeline, dut_pipeline, ideal_pipeline
from .response import MagnitudeResponse
from .weighting import WeightingFilter, apply_filter, design_frequency_weighting

__all__ = [
    "FAST",
    "SLOW",
    "CalibrationState",
    "MagnitudeResponse",
    "SampleBuffer",
    "SlmPipeline",
    "SplSeries",
    "WeightingFilter",
    "apply_filter",
    "calibrate",
    "design_frequency_weighting",
    "dut_pipeline",
    "exponential_detector",
    "ideal_pipeline",
    "leq",
    "read_wav",
    "write_wav",
]
