"""Shared fixtures and independent test-side oracles.

Oracles here are written from first principles (analytic formulas, brute
force) and deliberately do not call the package code paths they check.
"""

import numpy as np
import pytest

RATE = 44100

# Analog A-curve constants (public standard values).
F1, F2, F3, F4 = 20.598997, 107.65265, 737.86223, 12194.217


def analytic_a_db(freq_hz):
    """Independent A-curve oracle: 20*log10(R_A(f)) + 2.000 dB."""
    f2 = np.square(np.asarray(freq_hz, dtype=np.float64))
    ra = (F4**2 * f2**2) / (
        (f2 + F1**2) * np.sqrt((f2 + F2**2) * (f2 + F3**2)) * (f2 + F4**2)
    )
    return 20.0 * np.log10(ra) + 2.0


def tone(freq_hz, duration_s, rate=RATE, amplitude=1.0, phase=0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)


def amp_for(level_db):
    """Scene convention: sine amplitude for a given SPL (full scale 134 dB)."""
    return 10.0 ** ((level_db - 134.0) / 20.0)


def a_weighted_level_fft(x, rate=RATE, offset_db=None):
    """Oracle A-weighted Leq via FFT bins and the analytic curve.

    Independent of the package's filters: weights the periodogram with the
    analytic A power response and integrates.
    """
    n = len(x)
    spec = np.abs(np.fft.rfft(x)) ** 2 / n**2
    # one-sided power accounting
    spec[1:] *= 2.0
    if n % 2 == 0:
        spec[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    weights = np.zeros_like(freqs)
    nz = freqs > 0
    weights[nz] = 10.0 ** (analytic_a_db(freqs[nz]) / 10.0)
    power = float(np.sum(spec * weights))
    if offset_db is None:
        offset_db = 94.0 - 10.0 * np.log10(amp_for(94.0) ** 2 / 2.0)
    return 10.0 * np.log10(power) + offset_db


@pytest.fixture(scope="session")
def keypair():
    from acslm.nodenet.envelope import generate_keypair

    return generate_keypair()


@pytest.fixture(scope="session")
def second_keypair():
    from acslm.nodenet.envelope import generate_keypair

    return generate_keypair()


@pytest.fixture(scope="session")
def default_mic_curve():
    from acslm.micmodel import default_mic_response

    return default_mic_response()
