"""SPL metering: exponential time weighting, calibration and Leq.

The measurement chain is: frequency weighting -> squaring -> one-pole
exponential average with time constant tau -> 10*log10 -> calibration
offset. The recursion coefficient is a = exp(-1 / (fs * tau)), which makes a
gated steady tone rise along 10*log10(1 - exp(-t/tau)) toward its plateau.
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .audio import SampleBuffer
from .errors import AcslmError, CalibrationError
from .kernels import power_detect
from .weighting import apply_filter, design_frequency_weighting

# Final readings are clamped here so digital silence stays finite.
FLOOR_DB = -120.0

DEFAULT_INTERVAL_S = 0.125


@dataclass(frozen=True)
class TimeWeighting:
    """Exponential detector time constant."""

    tau_s: float
    label: str

    def __post_init__(self):
        if self.tau_s <= 0:
            raise AcslmError("tau_s must be positive")

    def coefficient(self, rate):
        return float(np.exp(-1.0 / (rate * self.tau_s)))


FAST = TimeWeighting(0.125, "fast")
SLOW = TimeWeighting(1.0, "slow")


@dataclass(frozen=True)
class CalibrationState:
    """Offset mapping digital mean-square readings onto SPL."""

    offset_db: float
    reference_level_dba: float = 94.0
    reference_freq_hz: float = 1000.0
    calibrated_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )


UNCALIBRATED = CalibrationState(offset_db=0.0)


@dataclass
class SplSeries:
    """Timestamped weighted SPL readings plus the detector's max hold."""

    times_s: np.ndarray
    levels_dba: np.ndarray
    detector: TimeWeighting
    weighting: str = "A"
    interval_s: float = DEFAULT_INTERVAL_S
    max_hold_dba: float = FLOOR_DB
    floor_db: float = FLOOR_DB

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=np.float64)
        self.levels_dba = np.asarray(self.levels_dba, dtype=np.float64)
        if len(self.times_s) != len(self.levels_dba):
            raise AcslmError("times and levels must have equal length")
        if len(self.times_s) > 1 and np.any(np.diff(self.times_s) <= 0):
            raise AcslmError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.times_s)

    def to_csv(self, path_or_file):
        def _write(fh):
            fh.write("t_seconds,level_dba\n")
            for t, lv in zip(self.times_s, self.levels_dba):
                fh.write(f"{t:.6f},{lv:.4f}\n")

        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "w") as fh:
                _write(fh)
        else:
            _write(path_or_file)

    @classmethod
    def from_csv(cls, path_or_file, detector=FAST, weighting="A"):
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file)
            close = True
        else:
            fh, close = path_or_file, False
        try:
            header = fh.readline().strip()
            if header != "t_seconds,level_dba":
                raise AcslmError(f"unexpected series header {header!r}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        finally:
            if close:
                fh.close()
        times = np.array([float(r[0]) for r in rows])
        levels = np.array([float(r[1]) for r in rows])
        interval = float(times[1] - times[0]) if len(times) > 1 else DEFAULT_INTERVAL_S
        mx = float(levels.max()) if len(levels) else FLOOR_DB
        return cls(times, levels, detector, weighting, interval, mx)


def _to_level_db(mean_square, offset_db, floor_db=FLOOR_DB):
    ms = np.asarray(mean_square, dtype=np.float64)
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(ms, where=ms > 0.0, out=np.full(ms.shape, -np.inf))
    return np.maximum(level + offset_db, floor_db)


def exponential_detector(
    buffer: SampleBuffer,
    tw: TimeWeighting = FAST,
    cal: CalibrationState = UNCALIBRATED,
    interval_s: float = DEFAULT_INTERVAL_S,
    floor_db: float = FLOOR_DB,
    weighting_label: str = "A",
) -> SplSeries:
    """Exponentially time-weighted level series of an already weighted signal.

    The caller applies the frequency weighting first (see SlmPipeline for the
    assembled chain); this stage is squaring, smoothing, log and offset.
    """
    if len(buffer) == 0:
        raise AcslmError("empty buffer")
    rate = buffer.sample_rate_hz
    step = max(1, int(round(interval_s * rate)))
    sampled, max_sq, _, _ = power_detect(
        np.ascontiguousarray(buffer.samples), tw.coefficient(rate), 0.0, step, 0
    )
    times = (np.arange(len(sampled)) + 1) * (step / rate)
    levels = _to_level_db(sampled, cal.offset_db, floor_db)
    max_hold = float(_to_level_db(np.array([max_sq]), cal.offset_db, floor_db)[0])
    return SplSeries(
        times, levels, tw, weighting_label, step / rate, max_hold, floor_db
    )


def _plateau(levels, skip_fraction=0.5):
    tail = levels[int(len(levels) * skip_fraction):]
    if len(tail) == 0:
        tail = levels[-1:]
    return tail


def _tone_dominance(samples, rate, freq_hz, half_band_hz=150.0):
    """Fraction of total power within +-half_band_hz of freq_hz."""
    spec = np.abs(np.fft.rfft(samples)) ** 2
    freqs = np.fft.rfftfreq(len(samples), 1.0 / rate)
    total = spec.sum()
    if total <= 0:
        return 0.0
    band = (freqs >= freq_hz - half_band_hz) & (freqs <= freq_hz + half_band_hz)
    return float(spec[band].sum() / total)


def calibrate(
    reference: SampleBuffer,
    target_dba: float = 94.0,
    weighting: str = "A",
    reference_freq_hz: float = 1000.0,
) -> CalibrationState:
    """Derive the calibration offset from a steady ~1 kHz reference tone.

    The reference must be at least 1 s long, spectrally dominated by the
    reference frequency, and hold a stable fast-detector plateau
    (std <= 0.1 dB); otherwise a CalibrationError is raised.
    """
    rate = reference.sample_rate_hz
    if reference.duration_s < 1.0:
        raise CalibrationError(
            f"reference too short: {reference.duration_s:.3f} s < 1 s"
        )
    dominance = _tone_dominance(reference.samples, rate, reference_freq_hz)
    if dominance < 0.5:
        raise CalibrationError(
            "reference level unstable: signal is not a dominant "
            f"{reference_freq_hz:.0f} Hz tone (band power fraction {dominance:.2f})"
        )
    filt = design_frequency_weighting(weighting, rate)
    weighted = apply_filter(reference, filt)
    series = exponential_detector(weighted, FAST, UNCALIBRATED, weighting_label=weighting)
    plateau = _plateau(series.levels_dba)
    if float(np.std(plateau)) > 0.1:
        raise CalibrationError(
            f"reference level unstable: plateau std {np.std(plateau):.3f} dB > 0.1 dB"
        )
    offset = target_dba - float(np.mean(plateau))
    return CalibrationState(
        offset_db=offset,
        reference_level_dba=target_dba,
        reference_freq_hz=reference_freq_hz,
    )


def leq(
    buffer: SampleBuffer,
    weighting: str = "A",
    cal: CalibrationState = UNCALIBRATED,
    floor_db: float = FLOOR_DB,
) -> float:
    """Energy-equivalent level: 10*log10 of the time-mean weighted square."""
    if len(buffer) == 0:
        raise AcslmError("empty buffer")
    if weighting is None or str(weighting).upper() == "Z":
        weighted = buffer.samples
    else:
        filt = design_frequency_weighting(weighting, buffer.sample_rate_hz)
        weighted = apply_filter(buffer, filt).samples
    mean_sq = float(np.dot(weighted, weighted) / len(weighted))
    return float(_to_level_db(np.array([mean_sq]), cal.offset_db, floor_db)[0])
