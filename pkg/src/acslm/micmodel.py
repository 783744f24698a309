"""Virtual analog MEMS microphone front end.

Models the parts of a real capture chain that matter for metering tests: a
non-flat frequency response (realized as a minimum-phase FIR), white
self-noise anchored to an A-weighted floor level, hard clipping at the
acoustic overload point, and an optional power-supply hum injector.

The shipped default response curve is a synthetic stand-in, not measured
data: -6 dB/octave roll-off below 200 Hz, flat through 8 kHz, and a +8 dB
resonance bump centered at 13 kHz (Q ~ 2) of the kind produced by a
microphone port cavity.
"""

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.signal import fftconvolve

from .audio import RNG_MIC_NOISE, SampleBuffer, amplitude_for_spl, seeded_rng
from .errors import AcslmError
from .response import MagnitudeResponse
from .weighting import design_frequency_weighting

DEFAULT_SENSITIVITY_DB = -38.0
DEFAULT_OVERLOAD_DBA = 118.0
DEFAULT_NOISE_FLOOR_DBA = 29.9

# FIR fit size for the response filter.
_FIR_TAPS = 4097
_FIR_NFFT = 65536


def synthetic_mic_curve(n_points=256, f_lo=20.0, f_hi=20000.0):
    """The default synthetic response curve on a log grid."""
    f = np.geomspace(f_lo, f_hi, n_points)
    roll = np.where(f < 200.0, -6.0 * np.log2(200.0 / f), 0.0)
    sigma = 0.25 / np.sqrt(np.log(2.0))
    bump = 8.0 * np.exp(-((np.log2(f / 13000.0) / sigma) ** 2))
    return MagnitudeResponse(f, roll + bump).normalized()


def default_mic_response():
    """Load the shipped synthetic response curve."""
    ref = resources.files("acslm.data").joinpath("default_mic_response.csv")
    with ref.open("r") as fh:
        return MagnitudeResponse.from_csv(fh)


@dataclass
class DisturbanceModel:
    """Power-supply hum: harmonics of a fundamental, levels in dB SPL."""

    hum_fundamental_hz: float = 750.0
    harmonic_levels_db: list = field(default_factory=lambda: [40.0, 34.0, 28.0, 22.0])
    enabled: bool = False

    def __post_init__(self):
        if not np.all(np.isfinite(self.harmonic_levels_db)):
            raise AcslmError("harmonic levels must be finite")


@dataclass
class MicResponseModel:
    """Microphone parameters; see module docstring for the default curve."""

    response: MagnitudeResponse = field(default_factory=default_mic_response)
    sensitivity_db_re_1v_pa: float = DEFAULT_SENSITIVITY_DB
    overload_dba: float = DEFAULT_OVERLOAD_DBA
    noise_floor_dba: float = DEFAULT_NOISE_FLOOR_DBA
    noise_enabled: bool = True
    seed: int = 1

    def __post_init__(self):
        # equality permitted: a zero dynamic range is degenerate but computable
        if self.overload_dba < self.noise_floor_dba:
            raise AcslmError("overload level must not be below the noise floor")
        if self.response.f_lo > 20.0 or self.response.f_hi < 20000.0:
            raise AcslmError("response must cover at least 20 Hz - 20 kHz")

    def gain(self):
        """Broadband gain relative to the nominal sensitivity."""
        return 10.0 ** ((self.sensitivity_db_re_1v_pa - DEFAULT_SENSITIVITY_DB) / 20.0)

    def clip_amplitude(self):
        """Output amplitude of a sine at the acoustic overload point."""
        return amplitude_for_spl(self.overload_dba) * self.gain()


def derived_metrics(model: MicResponseModel) -> dict:
    """Dynamic range and SNR at the 94 dB reference level."""
    return {
        "dynamic_range_db": model.overload_dba - model.noise_floor_dba,
        "snr_at_94_db": 94.0 - model.noise_floor_dba,
    }


def response_fir(response: MagnitudeResponse, rate, n_taps=_FIR_TAPS, n_fft=_FIR_NFFT):
    """Minimum-phase FIR whose magnitude fits the curve (0 dB at 1 kHz).

    Real-cepstrum construction: fold the cepstrum of the log magnitude and
    exponentiate. Out-of-grid frequencies continue the curve's edge slopes,
    limited to +-60 dB.
    """
    f = np.fft.rfftfreq(n_fft, 1.0 / rate)
    db = response.normalized().level_at(np.maximum(f, response.f_lo * 1e-3), extrapolate=True)
    log_mag = db * (np.log(10.0) / 20.0)
    cep = np.fft.irfft(log_mag, n_fft)
    fold = np.zeros(n_fft)
    fold[0] = 1.0
    fold[1 : n_fft // 2] = 2.0
    fold[n_fft // 2] = 1.0
    h = np.fft.irfft(np.exp(np.fft.rfft(cep * fold, n_fft)), n_fft)
    return h[:n_taps].copy()


def a_weighted_power_gain(rate):
    """Mean A-weighted power gain for unit-variance white noise at ``rate``."""
    filt = design_frequency_weighting("A", rate)
    from scipy.signal import sosfreqz

    w, h = sosfreqz(filt.sections, worN=8192)
    return float(np.mean(np.abs(h) ** 2))


def noise_sigma(model: MicResponseModel, rate):
    """Std of the white self-noise so its A-weighted level reads the floor."""
    ref_ms = (amplitude_for_spl(94.0) * model.gain()) ** 2 / 2.0
    target = ref_ms * 10.0 ** ((model.noise_floor_dba - 94.0) / 10.0)
    return float(np.sqrt(target / a_weighted_power_gain(rate)))


class MicrophoneStream:
    """Streaming microphone simulation with carried filter/noise state.

    Chunked processing produces exactly the same samples as a single call:
    the FIR overlap tail, the noise generator and the hum phase all persist
    across chunks.
    """

    def __init__(self, model: MicResponseModel, rate, disturbance=None):
        self.model = model
        self.rate = rate
        self.disturbance = disturbance
        self.fir = response_fir(model.response, rate) * model.gain()
        self._tail = np.zeros(len(self.fir) - 1)
        self._rng = seeded_rng(model.seed, RNG_MIC_NOISE)
        self._sigma = noise_sigma(model, rate) if model.noise_enabled else 0.0
        self._pos = 0  # absolute sample index, for hum phase
        self.clip_level = model.clip_amplitude()
        self.clipped_samples = 0

    def process(self, samples):
        x = np.asarray(samples, dtype=np.float64)
        if len(x) == 0:
            return x
        y = fftconvolve(x, self.fir)
        y[: len(self._tail)] += self._tail
        out, self._tail = y[: len(x)].copy(), y[len(x):]
        if self._sigma > 0.0:
            out += self._rng.standard_normal(len(x)) * self._sigma
        if self.disturbance is not None and self.disturbance.enabled:
            t = (self._pos + np.arange(len(x))) / self.rate
            gain = self.model.gain()
            for k, level in enumerate(self.disturbance.harmonic_levels_db, start=1):
                amp = amplitude_for_spl(level) * gain
                out += amp * np.sin(2.0 * np.pi * k * self.disturbance.hum_fundamental_hz * t)
        self._pos += len(x)
        n_clip = int(np.count_nonzero(np.abs(out) > self.clip_level))
        if n_clip:
            np.clip(out, -self.clip_level, self.clip_level, out=out)
            self.clipped_samples += n_clip
        return out

    @property
    def clipped(self):
        return self.clipped_samples > 0


def simulate_microphone(
    pressure: SampleBuffer,
    model: MicResponseModel,
    disturbance: DisturbanceModel | None = None,
) -> SampleBuffer:
    """Run a pressure signal through the virtual microphone.

    Output = response-filtered input + anchored self-noise + optional hum,
    hard-clipped at the overload-equivalent amplitude. Clipping sets the
    buffer's ``clipped`` flag rather than raising.
    """
    stream = MicrophoneStream(model, pressure.sample_rate_hz, disturbance)
    out = stream.process(pressure.samples)
    return SampleBuffer(
        out,
        pressure.sample_rate_hz,
        pressure.bit_depth_meta,
        clipped=stream.clipped or pressure.clipped,
    )
