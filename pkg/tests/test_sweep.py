import numpy as np
import pytest
from scipy.signal import fftconvolve, lfilter

from acslm.audio import SampleBuffer
from acslm.errors import AcslmError, RateMismatchError
from acslm.micmodel import MicResponseModel, simulate_microphone
from acslm.response import MagnitudeResponse, flat_response
from acslm.sweep import (
    ImpulseResponse,
    deconvolve,
    generate_sweep,
    magnitude_from_ir,
    subtract_reference,
)

from conftest import RATE


@pytest.fixture(scope="module")
def full_sweep():
    return generate_sweep(20.0, 20000.0, 10.0, RATE)


class TestGenerate:
    def test_band_and_duration_validated(self):
        with pytest.raises(AcslmError):
            generate_sweep(1000.0, 100.0, 5.0, RATE)
        with pytest.raises(AcslmError):
            generate_sweep(20.0, 30000.0, 5.0, RATE)
        with pytest.raises(AcslmError):
            generate_sweep(20.0, 20000.0, 0.5, RATE)

    def test_end_frequency_follows_sweep_law(self):
        sw = generate_sweep(100.0, 10000.0, 5.0, RATE)
        # analytic law: f(T) = f_start * exp(T/L) = f_end exactly
        assert sw.instantaneous_freq(5.0) == pytest.approx(10000.0, rel=1e-12)
        # empirical: zero crossings over the final 10 ms
        tail = sw.samples.samples[-int(0.010 * RATE):]
        crossings = np.sum(np.abs(np.diff(np.signbit(tail))))
        f_est = crossings / 2.0 / 0.010
        assert f_est == pytest.approx(10000.0, rel=0.01)

    def test_instantaneous_frequency_monotone(self, full_sweep):
        t = np.linspace(0.0, 10.0, 1000)
        f = full_sweep.instantaneous_freq(t)
        assert np.all(np.diff(f) > 0)

    def test_self_deconvolution_psr(self, full_sweep):
        d = fftconvolve(full_sweep.samples.samples, full_sweep.inverse.samples)
        d = d / np.max(np.abs(d))
        peak = int(np.argmax(np.abs(d)))
        guard = int(0.010 * RATE)
        sidelobe = np.max(np.abs(np.concatenate([d[: peak - guard], d[peak + guard :]])))
        psr_db = -20.0 * np.log10(sidelobe)
        assert psr_db > 60.0


class TestDeconvolve:
    def test_sweep_itself_gives_near_delta(self, full_sweep):
        ir = deconvolve(full_sweep.samples, full_sweep)
        mag = magnitude_from_ir(ir)
        chk = np.geomspace(100.0, 15000.0, 200)
        assert np.max(np.abs(mag.level_at(chk))) <= 0.1

    def test_known_one_pole_lowpass_recovered(self, full_sweep):
        # oracle: analytic magnitude of the digital one-pole y = (1-c)x + c y
        c = np.exp(-2.0 * np.pi * 1000.0 / RATE)
        recorded = lfilter([1.0 - c], [1.0, -c], full_sweep.samples.samples)
        ir = deconvolve(SampleBuffer(recorded, RATE), full_sweep)
        mag = magnitude_from_ir(ir)
        chk = np.geomspace(50.0, 10000.0, 300)
        w = 2.0 * np.pi * chk / RATE
        analytic = 20.0 * np.log10(
            (1.0 - c) / np.abs(1.0 - c * np.exp(-1j * w))
        )
        analytic -= 20.0 * np.log10(
            (1.0 - c) / abs(1.0 - c * np.exp(-1j * 2.0 * np.pi * 1000.0 / RATE))
        )
        assert np.max(np.abs(mag.level_at(chk) - analytic)) <= 0.3

    def test_delay_shifts_peak(self, full_sweep):
        base = deconvolve(full_sweep.samples, full_sweep)
        delayed = np.concatenate([np.zeros(1000), full_sweep.samples.samples])
        shifted = deconvolve(SampleBuffer(delayed, RATE), full_sweep)
        assert shifted.peak_index - base.peak_index == pytest.approx(1000, abs=1)

    def test_rate_mismatch_rejected(self, full_sweep):
        with pytest.raises(RateMismatchError):
            deconvolve(SampleBuffer(np.zeros(len(full_sweep.samples)), 48000), full_sweep)

    def test_short_recording_rejected(self, full_sweep):
        with pytest.raises(AcslmError):
            deconvolve(SampleBuffer(np.zeros(100), RATE), full_sweep)

    def test_passive_system_spectrum_bounded(self, full_sweep):
        # passive chain (max gain < 1): deconvolved spectrum never exceeds
        # the measurement system's own self-deconvolution reference by
        # more than 0.1 dB
        kernel = np.array([0.2, 0.5, 0.2])  # peak gain 0.9 at DC
        recorded = fftconvolve(full_sweep.samples.samples, kernel)
        raw_ir = fftconvolve(recorded, full_sweep.inverse.samples)
        self_ir = fftconvolve(full_sweep.samples.samples, full_sweep.inverse.samples)
        spec = np.abs(np.fft.rfft(raw_ir, 1 << 20))
        ref = np.abs(np.fft.rfft(self_ir, 1 << 20))
        freqs = np.fft.rfftfreq(1 << 20, 1.0 / RATE)
        band = (freqs >= 30.0) & (freqs <= 18000.0)
        ratio_db = 20.0 * np.log10(spec[band] / ref[band])
        assert np.max(ratio_db) <= 0.1


class TestMagnitude:
    def test_unit_impulse_flat(self):
        ir = ImpulseResponse(SampleBuffer(np.array([1.0, 0.0, 0.0]), RATE), 0)
        mag = magnitude_from_ir(ir)
        chk = np.geomspace(20.0, 20000.0, 100)
        assert np.max(np.abs(mag.level_at(chk))) <= 1e-9

    def test_two_sample_averager(self):
        # oracle |cos(pi f / fs)|: at fs/4 gives -3.01 dB, -2.99 after the
        # 1 kHz normalization
        ir = ImpulseResponse(SampleBuffer(np.array([0.5, 0.5]), RATE), 0)
        mag = magnitude_from_ir(ir)
        oracle = 20.0 * np.log10(np.cos(np.pi * 11025.0 / RATE / 2.0 * 2.0))
        oracle -= 20.0 * np.log10(np.cos(np.pi * 1000.0 / RATE))
        assert oracle == pytest.approx(-2.99, abs=0.01)
        assert mag.level_at(11025.0) == pytest.approx(oracle, abs=0.2)

    def test_smoothing_preserves_smooth_curves(self, full_sweep):
        c = np.exp(-2.0 * np.pi * 2000.0 / RATE)
        recorded = lfilter([1.0 - c], [1.0, -c], full_sweep.samples.samples)
        ir = deconvolve(SampleBuffer(recorded, RATE), full_sweep)
        plain = magnitude_from_ir(ir)
        smooth = magnitude_from_ir(ir, smoothing=24)
        chk = np.geomspace(100.0, 10000.0, 100)
        assert np.max(np.abs(plain.level_at(chk) - smooth.level_at(chk))) <= 0.1

    def test_empty_ir_rejected(self):
        with pytest.raises(AcslmError):
            magnitude_from_ir(ImpulseResponse(SampleBuffer(np.empty(0), RATE), 0))

    def test_small_nfft_rejected(self):
        ir = ImpulseResponse(SampleBuffer(np.ones(4096), RATE), 0)
        with pytest.raises(AcslmError):
            magnitude_from_ir(ir, nfft=1024)


class TestSubtract:
    def test_identical_gives_flat(self, default_mic_curve):
        out = subtract_reference(default_mic_curve, default_mic_curve)
        assert np.max(np.abs(out.levels_db)) <= 1e-9

    def test_recovers_added_curve(self, default_mic_curve):
        grid = np.geomspace(20.0, 20000.0, 400)
        room = MagnitudeResponse(grid, 3.0 * np.sin(np.log(grid)))
        combined = MagnitudeResponse(
            grid, room.levels_db + default_mic_curve.normalized().level_at(grid)
        )
        recovered = subtract_reference(combined, room)
        target = default_mic_curve.normalized().level_at(recovered.freqs_hz)
        target -= np.interp(1000.0, recovered.freqs_hz, target)
        assert np.max(np.abs(recovered.levels_db - target)) <= 0.1

    def test_half_bin_grid_offset(self):
        grid_a = np.geomspace(20.0, 20000.0, 512)
        step = grid_a[1] / grid_a[0]
        grid_b = grid_a * np.sqrt(step)
        smooth = lambda f: 4.0 * np.tanh(np.log(f / 500.0))
        a = MagnitudeResponse(grid_a, smooth(grid_a))
        b = MagnitudeResponse(grid_b, smooth(grid_b))
        out = subtract_reference(a, b)
        inner = (out.freqs_hz > 30.0) & (out.freqs_hz < 15000.0)
        assert np.max(np.abs(out.levels_db[inner])) <= 0.05

    def test_disjoint_grids_rejected(self):
        a = MagnitudeResponse(np.geomspace(20.0, 90.0, 16), np.zeros(16))
        b = MagnitudeResponse(np.geomspace(100.0, 20000.0, 16), np.zeros(16))
        with pytest.raises(AcslmError):
            subtract_reference(a, b)


def test_sweep_wav_round_trip(tmp_path, full_sweep):
    from acslm.audio import read_wav, write_wav

    path = tmp_path / "sweep.wav"
    write_wav(path, full_sweep.samples)
    back = read_wav(path)
    assert back.sample_rate_hz == RATE
    assert len(back) == len(full_sweep.samples)
    assert np.max(np.abs(back.samples - full_sweep.samples.samples)) <= 1.0 / 32767.0


def test_round_trip_through_microphone(default_mic_curve, full_sweep):
    # mic curve recovered end to end within 0.3 dB over 50 Hz - 15 kHz;
    # the sweep is driven at 94 dB so the microphone stays unclipped
    from acslm.audio import amplitude_for_spl

    model = MicResponseModel(response=default_mic_curve, noise_enabled=False)
    drive = SampleBuffer(full_sweep.samples.samples * amplitude_for_spl(94.0), RATE)
    recorded = simulate_microphone(drive, model)
    assert not recorded.clipped
    ir = deconvolve(recorded, full_sweep)
    mag = magnitude_from_ir(ir)
    recovered = subtract_reference(mag, flat_response())
    chk = np.geomspace(50.0, 15000.0, 400)
    err = recovered.level_at(chk) - default_mic_curve.normalized().level_at(chk)
    assert np.max(np.abs(err)) <= 0.3
