"""Swept-sine response measurement.

Exponential sweeps x(t) = sin(K * (exp(t/L) - 1)) with K = 2*pi*f_start*L
and L = T / ln(f_end/f_start); the convolutional inverse is the
time-reversed sweep with a -6 dB/octave amplitude envelope compensating the
sweep's pink energy distribution. Deconvolving a recording against the
inverse yields the impulse response, from which magnitude responses are
extracted and reference-chain coloration is subtracted.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio import SampleBuffer
from .errors import AcslmError, RateMismatchError
from .response import MagnitudeResponse

# Raised-cosine edge fades keep spectral splash from the gated ends out of
# the deconvolution (values in seconds).
FADE_IN_S = 0.05
FADE_OUT_S = 0.05


@dataclass
class SweepSignal:
    f_start_hz: float
    f_end_hz: float
    duration_s: float
    sample_rate_hz: int
    samples: SampleBuffer
    inverse: SampleBuffer

    def instantaneous_freq(self, t_s):
        L = self.duration_s / np.log(self.f_end_hz / self.f_start_hz)
        return self.f_start_hz * np.exp(np.asarray(t_s, dtype=np.float64) / L)


@dataclass
class ImpulseResponse:
    samples: SampleBuffer
    peak_index: int

    def __post_init__(self):
        if not 0 <= self.peak_index < len(self.samples):
            raise AcslmError("peak index out of bounds")


def generate_sweep(f_start, f_end, duration_s, rate=44100) -> SweepSignal:
    """Exponential sweep and its amplitude-compensated inverse."""
    if not 0 < f_start < f_end <= rate / 2:
        raise AcslmError(
            f"need 0 < f_start < f_end <= rate/2, got ({f_start}, {f_end}) at {rate} Hz"
        )
    if duration_s < 1.0:
        raise AcslmError(f"sweep duration {duration_s} s below 1 s minimum")
    n = int(round(duration_s * rate))
    t = np.arange(n, dtype=np.float64) / rate
    L = duration_s / np.log(f_end / f_start)
    K = 2.0 * np.pi * f_start * L
    x = np.sin(K * (np.exp(t / L) - 1.0))

    n_in = int(FADE_IN_S * rate)
    n_out = int(FADE_OUT_S * rate)
    if n_in:
        x[:n_in] *= 0.5 - 0.5 * np.cos(np.pi * np.arange(n_in) / n_in)
    if n_out:
        x[-n_out:] *= (0.5 - 0.5 * np.cos(np.pi * np.arange(n_out) / n_out))[::-1]

    inv = x[::-1] * np.exp(-t / L)
    # normalize so self-deconvolution peaks at 1
    peak = np.max(np.abs(fftconvolve(x, inv)))
    inv /= peak
    return SweepSignal(
        f_start_hz=float(f_start),
        f_end_hz=float(f_end),
        duration_s=float(duration_s),
        sample_rate_hz=int(rate),
        samples=SampleBuffer(x, rate),
        inverse=SampleBuffer(inv, rate),
    )


def deconvolve(recorded: SampleBuffer, sweep: SweepSignal) -> ImpulseResponse:
    """Impulse response of the chain the sweep passed through."""
    if recorded.sample_rate_hz != sweep.sample_rate_hz:
        raise RateMismatchError(
            f"recording rate {recorded.sample_rate_hz} != sweep rate {sweep.sample_rate_hz}"
        )
    if len(recorded) < len(sweep.samples):
        raise AcslmError("recording shorter than the sweep")
    ir = fftconvolve(recorded.samples, sweep.inverse.samples)
    peak = int(np.argmax(np.abs(ir)))
    scale = np.abs(ir[peak])
    if scale > 0:
        ir = ir / scale
    return ImpulseResponse(SampleBuffer(ir, recorded.sample_rate_hz), peak)


def magnitude_from_ir(
    ir: ImpulseResponse, nfft=1 << 18, smoothing=None, window_s=(0.05, 1.0)
) -> MagnitudeResponse:
    """Windowed FFT magnitude of an impulse response, 0 dB at 1 kHz.

    ``smoothing`` is a fractional-octave denominator (e.g. 24 for 1/24
    octave); None skips smoothing, which is what filter design inputs want.
    ``window_s`` sets the extracted (pre, post) interval around the peak.
    """
    if len(ir.samples) == 0:
        raise AcslmError("empty impulse response")
    rate = ir.samples.sample_rate_hz
    pre = int(window_s[0] * rate)
    post = int(window_s[1] * rate)
    lo = max(0, ir.peak_index - pre)
    hi = min(len(ir.samples), ir.peak_index + post)
    seg = ir.samples.samples[lo:hi]
    if nfft < len(seg):
        raise AcslmError(f"nfft {nfft} smaller than windowed IR length {len(seg)}")
    spec = np.abs(np.fft.rfft(seg, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / rate)
    levels = 20.0 * np.log10(np.maximum(spec, 1e-300))
    keep = freqs > 0
    freqs, levels = freqs[keep], levels[keep]
    if smoothing:
        levels = _fractional_octave_smooth(freqs, levels, smoothing)
    return MagnitudeResponse(freqs, levels).normalized()


def _fractional_octave_smooth(freqs, levels, denominator):
    """Gaussian smoothing in log frequency with 1/denominator octave sigma."""
    logf = np.log2(freqs)
    sigma = 1.0 / denominator / 2.0
    # resample to a uniform log grid, convolve, resample back
    grid = np.linspace(logf[0], logf[-1], 4096)
    on_grid = np.interp(grid, logf, levels)
    d = grid[1] - grid[0]
    half = int(np.ceil(4 * sigma / d))
    kern = np.exp(-0.5 * ((np.arange(-half, half + 1) * d) / sigma) ** 2)
    kern /= kern.sum()
    pad = np.pad(on_grid, half, mode="edge")
    smoothed = np.convolve(pad, kern, mode="valid")
    return np.interp(logf, grid, smoothed)


def subtract_reference(dut: MagnitudeResponse, ref: MagnitudeResponse) -> MagnitudeResponse:
    """Pointwise dB subtraction on the common grid, renormalized at 1 kHz."""
    f_lo = max(dut.f_lo, ref.f_lo)
    f_hi = min(dut.f_hi, ref.f_hi)
    if f_lo >= f_hi:
        raise AcslmError("response grids do not overlap")
    grid = dut.freqs_hz[(dut.freqs_hz >= f_lo) & (dut.freqs_hz <= f_hi)]
    if len(grid) < 2:
        grid = np.geomspace(f_lo, f_hi, 512)
    diff = dut.level_at(grid) - ref.level_at(grid)
    return MagnitudeResponse(grid, diff).normalized()
