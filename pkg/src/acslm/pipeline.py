"""Assembled metering pipelines.

A pipeline chains optional input gain, the virtual microphone, the inverse
equalizer, the frequency weighting and the exponential detector, and owns a
calibration offset established from the 94 dB reference tone played through
the same chain. Pipelines process either whole buffers or arbitrarily
chunked streams with identical results; every stage carries its state.
"""

import numpy as np

from .audio import (
    REFERENCE_FREQ_HZ,
    REFERENCE_SPL_DB,
    SampleBuffer,
    amplitude_for_spl,
    sine,
)
from .compensation import StreamingConvolver
from .errors import AcslmError, ConformanceError
from .kernels import biquad_cascade, power_detect
from .meter import (
    DEFAULT_INTERVAL_S,
    FAST,
    FLOOR_DB,
    CalibrationState,
    SplSeries,
    TimeWeighting,
    _to_level_db,
)
from .micmodel import MicrophoneStream
from .weighting import design_frequency_weighting


class SlmStream:
    """One measurement session; feed chunks, then take the result."""

    def __init__(self, pipeline):
        self.p = pipeline
        self._weight_zi = np.zeros((len(pipeline.weighting_filter.sections), 2))
        self._mic = (
            MicrophoneStream(pipeline.mic_model, pipeline.rate, pipeline.disturbance)
            if pipeline.mic_model is not None
            else None
        )
        self._comp = (
            StreamingConvolver(pipeline.compensation)
            if pipeline.compensation is not None
            else None
        )
        self._det_state = 0.0
        self._det_phase = 0
        self._max_sq = -1.0
        self._levels = []
        self._sq_sum = 0.0
        self._n = 0
        self._clipped = False

    def feed(self, samples):
        x = np.ascontiguousarray(samples, dtype=np.float64)
        if len(x) == 0:
            return
        if self.p.gain_db != 0.0:
            x = x * 10.0 ** (self.p.gain_db / 20.0)
        if self._mic is not None:
            x = self._mic.process(x)
            self._clipped = self._clipped or self._mic.clipped
        if self._comp is not None:
            x = self._comp.process(x)
            if len(x) == 0:
                return
        x = biquad_cascade(
            np.ascontiguousarray(x), self.p.weighting_filter.sections, self._weight_zi
        )
        self._sq_sum += float(np.dot(x, x))
        self._n += len(x)
        sampled, max_sq, self._det_state, self._det_phase = power_detect(
            x, self.p.detector_coeff, self._det_state, self.p.step, self._det_phase
        )
        if max_sq > self._max_sq:
            self._max_sq = max_sq
        if len(sampled):
            self._levels.append(sampled)

    def result(self) -> SplSeries:
        levels_sq = (
            np.concatenate(self._levels) if self._levels else np.empty(0)
        )
        offset = self.p.offset_db
        times = (np.arange(len(levels_sq)) + 1) * (self.p.step / self.p.rate)
        series = SplSeries(
            times,
            _to_level_db(levels_sq, offset, self.p.floor_db),
            self.p.detector,
            self.p.weighting_kind,
            self.p.step / self.p.rate,
            float(_to_level_db(np.array([self._max_sq]), offset, self.p.floor_db)[0])
            if self._max_sq >= 0.0
            else self.p.floor_db,
            self.p.floor_db,
        )
        return series

    @property
    def leq_dba(self):
        if self._n == 0:
            raise AcslmError("no samples fed")
        return float(
            _to_level_db(
                np.array([self._sq_sum / self._n]), self.p.offset_db, self.p.floor_db
            )[0]
        )

    @property
    def clipped(self):
        return self._clipped


class SlmPipeline:
    """Calibrated measurement chain, optionally behind a virtual microphone."""

    def __init__(
        self,
        rate=44100,
        weighting="A",
        detector: TimeWeighting = FAST,
        mic_model=None,
        compensation=None,
        disturbance=None,
        interval_s=DEFAULT_INTERVAL_S,
        floor_db=FLOOR_DB,
    ):
        self.rate = int(rate)
        self.weighting_kind = str(weighting).upper()
        self.weighting_filter = design_frequency_weighting(weighting, rate)
        self.detector = detector
        self.detector_coeff = detector.coefficient(rate)
        self.mic_model = mic_model
        self.compensation = compensation
        self.disturbance = disturbance
        self.step = max(1, int(round(interval_s * rate)))
        self.floor_db = floor_db
        self.gain_db = 0.0
        self.calibration: CalibrationState | None = None

    @property
    def offset_db(self):
        return self.calibration.offset_db if self.calibration else 0.0

    @property
    def is_calibrated(self):
        return self.calibration is not None

    def reference_tone(self, duration_s=2.0, level_db=REFERENCE_SPL_DB):
        return sine(
            REFERENCE_FREQ_HZ, duration_s, self.rate, amplitude_for_spl(level_db)
        )

    def calibrate(self, reference: SampleBuffer | None = None, target_dba=REFERENCE_SPL_DB):
        """Set the offset so the reference tone's plateau reads ``target_dba``."""
        if reference is None:
            reference = self.reference_tone()
        self.calibration = None
        plateau = self.steady_reading(reference.samples)
        self.calibration = CalibrationState(
            offset_db=target_dba - plateau,
            reference_level_dba=target_dba,
            reference_freq_hz=REFERENCE_FREQ_HZ,
        )
        return self.calibration

    def open_stream(self) -> SlmStream:
        return SlmStream(self)

    def measure(self, samples) -> SplSeries:
        """One-shot measurement of a buffer or raw sample array."""
        if isinstance(samples, SampleBuffer):
            samples = samples.samples
        stream = self.open_stream()
        stream.feed(samples)
        return stream.result()

    def leq_of(self, samples) -> float:
        if isinstance(samples, SampleBuffer):
            samples = samples.samples
        stream = self.open_stream()
        stream.feed(samples)
        return stream.leq_dba

    def max_hold_of(self, samples) -> float:
        return self.measure(samples).max_hold_dba

    def steady_reading(self, samples) -> float:
        """Mean of the detector readings over the last half of the signal.

        For steady signals this coincides with the Leq of the settled
        portion; it is the statistic used for calibration plateaus and
        steady-state table entries.
        """
        series = self.measure(samples)
        if len(series) == 0:
            raise AcslmError("signal too short for a steady reading")
        tail = series.levels_dba[len(series) // 2 :]
        return float(np.mean(tail))

    def set_gain(self, gain_db):
        self.gain_db = float(gain_db)


def ideal_pipeline(rate=44100, detector=FAST, weighting="A") -> SlmPipeline:
    """The reference chain: weighting plus detector, no microphone model."""
    p = SlmPipeline(rate=rate, weighting=weighting, detector=detector)
    p.calibrate()
    return p


def dut_pipeline(
    rate=44100,
    mic_model=None,
    compensation="auto",
    detector=FAST,
    weighting="A",
    disturbance=None,
    taper_band=None,
) -> SlmPipeline:
    """Device-under-test chain: microphone model, optional equalizer, meter.

    ``compensation='auto'`` designs the regularized inverse from the mic
    model's own response curve with the wide taper (inversion held flat down
    to 31.5 Hz so low-octave test tones meter correctly); pass None to
    disable or a filter to reuse.
    """
    from .compensation import WIDE_TAPER_BAND, design_regularized_inverse
    from .micmodel import MicResponseModel

    if mic_model is None:
        mic_model = MicResponseModel()
    if compensation == "auto":
        compensation = design_regularized_inverse(
            mic_model.response,
            taper_band=taper_band or WIDE_TAPER_BAND,
            sample_rate_hz=rate,
        )
    p = SlmPipeline(
        rate=rate,
        weighting=weighting,
        detector=detector,
        mic_model=mic_model,
        compensation=compensation,
        disturbance=disturbance,
    )
    p.calibrate()
    return p


def require_calibrated(*pipelines):
    for p in pipelines:
        if not p.is_calibrated:
            raise ConformanceError("pipeline must be calibrated first")
