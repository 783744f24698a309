import numpy as np
import pytest

from acslm.audio import write_wav
from acslm.conformance.stimuli import StimulusSpec, gen_stimulus
from acslm.conformance.tolerances import ToleranceSpec, adjusted_tolerance
from acslm.errors import AcslmError, ConformanceError

from conftest import RATE


def octave_band_power(x, rate, f_lo, f_hi):
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate)
    return float(spec[(freqs >= f_lo) & (freqs < f_hi)].sum())


class TestToneburst:
    def test_200ms_at_4khz(self):
        spec = StimulusSpec("toneburst", freq_hz=4000.0, duration_s=0.200)
        burst = gen_stimulus(spec, RATE)
        assert len(burst) == 8820  # 0.2 s at 44.1 kHz exactly
        assert 4000.0 * 0.200 == 800.0  # whole number of cycles
        assert burst.samples[0] == 0.0
        # gate edges land on zero phase: 2*pi*f*n/fs is a multiple of 2*pi
        end_phase = 4000.0 * len(burst) / RATE
        assert end_phase == pytest.approx(round(end_phase), abs=1e-9)

    def test_non_integer_cycles_rejected(self):
        with pytest.raises(AcslmError):
            gen_stimulus(StimulusSpec("toneburst", freq_hz=4000.0, duration_s=0.0003), RATE)


class TestTones:
    def test_octave_sine_single_peak(self):
        spec = StimulusSpec("octave_sine", freq_hz=31.5, duration_s=20.0)
        buf = gen_stimulus(spec, RATE)
        mag = np.abs(np.fft.rfft(buf.samples))
        freqs = np.fft.rfftfreq(len(buf), 1.0 / RATE)
        assert freqs[np.argmax(mag)] == pytest.approx(31.5, abs=0.1)

    def test_out_of_band_rejected(self):
        with pytest.raises(AcslmError):
            gen_stimulus(StimulusSpec("octave_sine", freq_hz=30000.0), RATE)


class TestNoise:
    def test_pink_equal_octave_power(self):
        buf = gen_stimulus(StimulusSpec("pink", duration_s=60.0, seed=1), RATE)
        edges = [31.5 * 2**k for k in range(10)]  # 31.5 .. 16128
        powers = [
            10.0 * np.log10(octave_band_power(buf.samples, RATE, lo, hi))
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
        assert max(powers) - min(powers) <= 0.5

    def test_pink_slope(self):
        buf = gen_stimulus(StimulusSpec("pink", duration_s=60.0, seed=2), RATE)
        edges = [31.5 * 2**k for k in range(10)]
        density = [
            10.0 * np.log10(octave_band_power(buf.samples, RATE, lo, hi) / (hi - lo))
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
        slopes = np.diff(density)
        assert np.all(np.abs(slopes + 3.01) <= 0.5)

    def test_white_flat_density(self):
        buf = gen_stimulus(StimulusSpec("white", duration_s=60.0, seed=1), RATE)
        edges = [31.5 * 2**k for k in range(10)]
        density = [
            10.0 * np.log10(octave_band_power(buf.samples, RATE, lo, hi) / (hi - lo))
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
        assert max(density) - min(density) <= 0.5

    def test_deterministic_per_seed(self):
        a = gen_stimulus(StimulusSpec("pink", duration_s=2.0, seed=5), RATE)
        b = gen_stimulus(StimulusSpec("pink", duration_s=2.0, seed=5), RATE)
        c = gen_stimulus(StimulusSpec("pink", duration_s=2.0, seed=6), RATE)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)


class TestRamp:
    def test_schedule_and_phase_continuity(self):
        spec = StimulusSpec(
            "ramp", freq_hz=1000.0, level_start_db=60.0, level_stop_db=63.0,
            level_step_db=1.0, dwell_s=0.5,
        )
        buf = gen_stimulus(spec, RATE)
        assert len(buf) == 4 * int(0.5 * RATE)
        # no phase jumps: adjacent-sample difference bounded by the carrier
        # slope plus the step gain change
        max_slope = np.max(np.abs(np.diff(buf.samples)))
        amp_top = 10.0 ** ((63.0 - 134.0) / 20.0)
        assert max_slope <= amp_top * 2.0 * np.pi * 1000.0 / RATE * 1.05


class TestFileStimulus:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "stim.wav"
        tone = gen_stimulus(StimulusSpec("octave_sine", freq_hz=500.0, duration_s=0.5), RATE)
        write_wav(path, tone)
        back = gen_stimulus(StimulusSpec("file", path=str(path)), RATE)
        assert back.sample_rate_hz == RATE
        assert np.max(np.abs(back.samples - tone.samples)) <= 1.0 / 32767.0


class TestAdjustedTolerance:
    def test_symmetric_worked_example(self):
        assert adjusted_tolerance(1.0, 2.0) == (1.0, 1.0)

    def test_equal_bounds_collapse_to_zero(self):
        assert adjusted_tolerance(1.0, 1.0) == (0.0, 0.0)

    def test_per_side_subtraction(self):
        assert adjusted_tolerance((1.0, 1.5), (1.0, 2.0)) == (0.0, 0.5)

    def test_wider_reference_rejected(self):
        with pytest.raises(ConformanceError):
            adjusted_tolerance(2.0, 1.0)

    def test_spec_object(self):
        spec = ToleranceSpec(type1_bounds_db=(1.0, 1.0), type2_bounds_db=(2.0, 2.0))
        assert spec.adjusted_bounds_db == (1.0, 1.0)
