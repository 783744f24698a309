"""Mono audio buffers, the digital level convention and WAV I/O.

All signals are float64 in [-1, 1] with full scale 1.0. Simulated acoustic
scenes use a fixed convention mapping digital amplitude to sound pressure
level: a sine of amplitude 1.0 corresponds to ``FULL_SCALE_DB_SPL``. The
94 dB calibration tone therefore has amplitude 0.01, and a 118 dB overload
point sits at 0.158, comfortably inside full scale.
"""

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import AcslmError

DEFAULT_RATE = 44100

# Sine amplitude 1.0 <-> this SPL, for synthetic scenes.
FULL_SCALE_DB_SPL = 134.0

# Level of the standard acoustic calibrator tone.
REFERENCE_SPL_DB = 94.0
REFERENCE_FREQ_HZ = 1000.0

_INT16_FS = 32767.0

# rng stream domains: distinct generators for the same user seed, so e.g.
# microphone self-noise never correlates with a noise stimulus built from
# the same seed
RNG_STIMULUS = 1
RNG_MIC_NOISE = 2
RNG_SCENE = 3
RNG_TRANSPORT = 4


def seeded_rng(seed, domain):
    """Deterministic generator for (seed, domain), independent across domains."""
    return np.random.default_rng(np.random.SeedSequence([int(domain), int(seed)]))


def amplitude_for_spl(level_db):
    """Sine amplitude that represents ``level_db`` under the scene convention."""
    return 10.0 ** ((level_db - FULL_SCALE_DB_SPL) / 20.0)


def spl_for_amplitude(amplitude):
    """Inverse of :func:`amplitude_for_spl`."""
    return FULL_SCALE_DB_SPL + 20.0 * np.log10(amplitude)


@dataclass
class SampleBuffer:
    """Mono signal plus its sample rate.

    ``clipped`` marks buffers whose samples were hard-limited somewhere in
    the chain; only then may magnitudes touch full scale meaningfully.
    """

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_RATE
    bit_depth_meta: int = 16
    clipped: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AcslmError("SampleBuffer expects a mono 1-D signal")
        if self.sample_rate_hz <= 0:
            raise AcslmError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise AcslmError("samples must be finite")

    def validate_full_scale(self):
        """Enforce |sample| <= 1 + 1e-9 unless the buffer is marked clipped.

        Applied on capture/storage paths; filtered intermediates are allowed
        transient headroom above full scale.
        """
        if not self.clipped and len(self.samples):
            peak = np.max(np.abs(self.samples))
            if peak > 1.0 + 1e-9:
                raise AcslmError(
                    f"sample magnitude {peak:.3g} exceeds full scale; "
                    "mark the buffer clipped or rescale"
                )
        return self

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz


def sine(freq_hz, duration_s, rate=DEFAULT_RATE, amplitude=1.0, phase=0.0):
    """Plain sine tone as a SampleBuffer."""
    n = int(round(duration_s * rate))
    t = np.arange(n, dtype=np.float64) / rate
    return SampleBuffer(amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase), rate)


def silence(duration_s, rate=DEFAULT_RATE):
    n = int(round(duration_s * rate))
    return SampleBuffer(np.zeros(n), rate)


def quantize16(samples):
    """Round float samples to the 16-bit grid (int16 array)."""
    return np.clip(np.rint(np.asarray(samples) * _INT16_FS), -32768, 32767).astype(np.int16)


def dequantize16(ints):
    """Inverse of :func:`quantize16`; exact round trip on the int16 grid."""
    return np.asarray(ints, dtype=np.float64) / _INT16_FS


def read_wav(path):
    """Read a mono 16-bit PCM WAV file into a SampleBuffer."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise AcslmError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype != np.int16:
        raise AcslmError(f"{path}: expected 16-bit PCM, got {data.dtype}")
    return SampleBuffer(dequantize16(data), int(rate))


def write_wav(path, buffer):
    """Write a SampleBuffer as mono 16-bit PCM WAV."""
    wavfile.write(path, buffer.sample_rate_hz, quantize16(buffer.samples))
