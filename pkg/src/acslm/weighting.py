"""Frequency weighting filters for SPL metering (IEC 61672 style).

The A-curve is defined in the analog domain by four pole frequencies and a
1 kHz normalization. Discretization uses the bilinear transform plus one
fitted correction biquad: the plain bilinear mapping of the 12.2 kHz pole
pair droops by more than 0.6 dB at 8 kHz when running at 44.1 kHz, which
would blow the accuracy budget, so a stability-constrained least-squares
biquad flattens the residual up to 16 kHz. Gain is renormalized to exactly
0 dB at 1 kHz after assembly.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, signal

from .audio import SampleBuffer
from .errors import RateMismatchError, UnsupportedRateError
from .kernels import biquad_cascade

# Analog pole frequencies of the A-curve and its 1 kHz make-up gain.
POLE_F1_HZ = 20.598997
POLE_F2_HZ = 107.65265
POLE_F3_HZ = 737.86223
POLE_F4_HZ = 12194.217
A1000_DB = 2.0

MIN_DESIGN_RATE = 32000


def analytic_a_weight_db(freq_hz):
    """A-curve magnitude in dB from the analog formula (0 dB at 1 kHz)."""
    f2 = np.square(np.asarray(freq_hz, dtype=np.float64))
    ra = (POLE_F4_HZ**2 * f2**2) / (
        (f2 + POLE_F1_HZ**2)
        * np.sqrt((f2 + POLE_F2_HZ**2) * (f2 + POLE_F3_HZ**2))
        * (f2 + POLE_F4_HZ**2)
    )
    return 20.0 * np.log10(ra) + A1000_DB


@dataclass(frozen=True)
class WeightingFilter:
    """Weighting curve realized as a cascade of second-order sections."""

    kind: str
    sections: np.ndarray  # (n, 6) sos rows
    design_rate_hz: int
    pole_constants_hz: tuple = (POLE_F1_HZ, POLE_F2_HZ, POLE_F3_HZ, POLE_F4_HZ)
    normalization_gain_db: float = A1000_DB

    def magnitude_db(self, freqs_hz):
        """Realized magnitude response at the given frequencies."""
        w = 2.0 * np.pi * np.atleast_1d(np.asarray(freqs_hz, float)) / self.design_rate_hz
        _, h = signal.sosfreqz(self.sections, worN=w)
        return 20.0 * np.log10(np.maximum(np.abs(h), 1e-300))

    def pole_radii(self):
        radii = []
        for b0, b1, b2, a0, a1, a2 in self.sections:
            radii.extend(np.abs(np.roots([a0, a1, a2])))
        return np.asarray(radii)


def _correction_biquad(sos_base, rate):
    """Fit one stable biquad that cancels the bilinear warp residual.

    The residual is matched on a log grid up to min(16.5 kHz, 0.45 * rate);
    pole radius is squashed through a sigmoid so the section is stable by
    construction.
    """
    hi = min(16500.0, 0.45 * rate)
    grid = np.geomspace(20.0, hi, 240)
    wrad = grid / rate * 2.0 * np.pi
    base_db = 20.0 * np.log10(np.abs(signal.sosfreqz(sos_base, worN=wrad)[1]))
    g1k = 20.0 * np.log10(
        np.abs(signal.sosfreqz(sos_base, worN=[1000.0 / rate * 2.0 * np.pi])[1][0])
    )
    resid = analytic_a_weight_db(grid) - (base_db - g1k)

    def unpack(params):
        g, zr_raw, zth, pr_raw, pth = params
        zr = 1.6 / (1.0 + np.exp(-zr_raw))
        pr = 0.998 / (1.0 + np.exp(-pr_raw))
        b = g * np.array([1.0, -2.0 * zr * np.cos(zth), zr * zr])
        a = np.array([1.0, -2.0 * pr * np.cos(pth), pr * pr])
        return b, a

    weights = np.where(grid <= 10000.0, 3.0, 1.0)

    def cost(params):
        b, a = unpack(params)
        h = signal.freqz(b, a, worN=wrad)[1]
        return (20.0 * np.log10(np.maximum(np.abs(h), 1e-12)) - resid) * weights

    best = None
    for zth0 in (2.0, 2.6, 3.0):
        for pth0 in (2.6, 3.0):
            fit = optimize.least_squares(
                cost, np.array([1.0, 0.0, zth0, 0.0, pth0]), method="trf", max_nfev=40000
            )
            if best is None or fit.cost < best.cost:
                best = fit
    b, a = unpack(best.x)
    return np.hstack([b, a])


@lru_cache(maxsize=8)
def _design_cached(kind, rate):
    if kind == "Z":
        sections = np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]])
        sections.setflags(write=False)
        return WeightingFilter(kind="Z", sections=sections, design_rate_hz=rate)

    zeros = [0.0] * 4
    poles = (
        [-2.0 * np.pi * POLE_F1_HZ] * 2
        + [-2.0 * np.pi * POLE_F2_HZ, -2.0 * np.pi * POLE_F3_HZ]
        + [-2.0 * np.pi * POLE_F4_HZ] * 2
    )
    zd, pd, kd = signal.bilinear_zpk(zeros, poles, 1.0, rate)
    sos = signal.zpk2sos(zd, pd, kd)
    sos = np.vstack([sos, _correction_biquad(sos, rate)])
    gain_1k = np.abs(signal.sosfreqz(sos, worN=[1000.0 / rate * 2.0 * np.pi])[1][0])
    sos[0, :3] /= gain_1k
    sos.setflags(write=False)  # instances are cached and shared
    return WeightingFilter(kind="A", sections=sos, design_rate_hz=rate)


def design_frequency_weighting(kind, sample_rate_hz):
    """Design an A- or Z-weighting filter for the given rate.

    Raises UnsupportedRateError below 32 kHz: the correction fit and the
    accuracy budget both assume the audio band fits under Nyquist.
    """
    kind = str(kind).upper()
    if kind not in ("A", "Z"):
        raise ValueError(f"unsupported weighting kind {kind!r}")
    rate = int(sample_rate_hz)
    if rate < MIN_DESIGN_RATE:
        raise UnsupportedRateError(
            f"sample rate {rate} Hz below minimum {MIN_DESIGN_RATE} Hz"
        )
    return _design_cached(kind, rate)


def apply_filter(buffer: SampleBuffer, filt: WeightingFilter) -> SampleBuffer:
    """Run a buffer through a weighting filter (zero initial state)."""
    if buffer.sample_rate_hz != filt.design_rate_hz:
        raise RateMismatchError(
            f"buffer rate {buffer.sample_rate_hz} != filter rate {filt.design_rate_hz}"
        )
    zi = np.zeros((len(filt.sections), 2))
    y = biquad_cascade(np.ascontiguousarray(buffer.samples), filt.sections, zi)
    return SampleBuffer(y, buffer.sample_rate_hz, buffer.bit_depth_meta, buffer.clipped)
