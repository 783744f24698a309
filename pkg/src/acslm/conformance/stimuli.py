"""Deterministic stimulus generation for the conformance battery.

Levels follow the scene convention in :mod:`acslm.audio`: a stimulus "at
L dB" is scaled so its unweighted (Z) level reads L through a calibrated
meter. Tonebursts gate an integer number of carrier cycles so both ends sit
at zero crossings; noise stimuli are reproducible per seed.
"""

from dataclasses import dataclass

import numpy as np

from ..audio import (
    DEFAULT_RATE,
    RNG_STIMULUS,
    SampleBuffer,
    amplitude_for_spl,
    read_wav,
    seeded_rng,
)
from ..errors import AcslmError

OCTAVE_FREQS_HZ = (31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)


@dataclass
class StimulusSpec:
    """Generator parameters; ``kind`` selects the branch in gen_stimulus."""

    kind: str  # octave_sine | toneburst | ramp | pink | white | file
    freq_hz: float = 1000.0
    duration_s: float = 20.0
    level_db: float = 94.0
    seed: int = 1
    # ramp schedule (dB): start, stop inclusive, step, dwell per step
    level_start_db: float = 20.0
    level_stop_db: float = 94.0
    level_step_db: float = 1.0
    dwell_s: float = 2.0
    path: str = ""


def _tone(freq_hz, duration_s, rate, amplitude, phase=0.0):
    n = int(round(duration_s * rate))
    t = np.arange(n, dtype=np.float64) / rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)


def _toneburst(freq_hz, duration_s, rate, amplitude):
    cycles = freq_hz * duration_s
    if abs(cycles - round(cycles)) > 1e-6:
        raise AcslmError(
            f"toneburst duration {duration_s} s is not a whole number of "
            f"{freq_hz} Hz cycles"
        )
    n = int(round(duration_s * rate))
    t = np.arange(n, dtype=np.float64) / rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t)


def _white(n, rate, rms, seed):
    rng = seeded_rng(seed, RNG_STIMULUS)
    x = rng.standard_normal(n)
    return x * (rms / np.sqrt(np.mean(x * x)))


def _pink(n, rate, rms, seed, f_lo=10.0):
    """Pink noise via 1/sqrt(f) spectral shaping of seeded white noise.

    Flat (in power per Hz) below ``f_lo`` to keep DC finite; -3.01 dB per
    octave above.
    """
    rng = seeded_rng(seed, RNG_STIMULUS)
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(n, 1.0 / rate)
    shape = np.ones_like(f)
    above = f >= f_lo
    shape[above] = np.sqrt(f_lo / f[above])
    spec *= shape
    spec[0] = 0.0
    y = np.fft.irfft(spec, n)
    return y * (rms / np.sqrt(np.mean(y * y)))


def _ramp(spec: StimulusSpec, rate):
    """Stepped level ramp with a phase-continuous carrier."""
    levels = np.arange(spec.level_start_db, spec.level_stop_db + 1e-9, spec.level_step_db)
    n_dwell = int(round(spec.dwell_s * rate))
    chunks = []
    if spec.kind == "ramp" and spec.freq_hz > 0:
        phase = 0.0
        for level in levels:
            amp = amplitude_for_spl(level)
            t = np.arange(n_dwell, dtype=np.float64) / rate
            chunks.append(amp * np.sin(2.0 * np.pi * spec.freq_hz * t + phase))
            phase += 2.0 * np.pi * spec.freq_hz * n_dwell / rate
    else:
        raise AcslmError("ramp stimulus needs a positive carrier frequency")
    return np.concatenate(chunks), levels


def gen_stimulus(spec: StimulusSpec, rate=DEFAULT_RATE) -> SampleBuffer:
    """Render a stimulus; deterministic for a given (spec, rate)."""
    amp = amplitude_for_spl(spec.level_db)
    rms = amp / np.sqrt(2.0)
    if spec.kind == "octave_sine":
        if spec.freq_hz <= 0 or spec.freq_hz >= rate / 2:
            raise AcslmError(f"sine frequency {spec.freq_hz} outside (0, rate/2)")
        data = _tone(spec.freq_hz, spec.duration_s, rate, amp)
    elif spec.kind == "toneburst":
        data = _toneburst(spec.freq_hz, spec.duration_s, rate, amp)
    elif spec.kind == "ramp":
        data, _ = _ramp(spec, rate)
    elif spec.kind == "white":
        data = _white(int(round(spec.duration_s * rate)), rate, rms, spec.seed)
    elif spec.kind == "pink":
        data = _pink(int(round(spec.duration_s * rate)), rate, rms, spec.seed)
    elif spec.kind == "file":
        return read_wav(spec.path)
    else:
        raise AcslmError(f"unknown stimulus kind {spec.kind!r}")
    return SampleBuffer(data, rate)
