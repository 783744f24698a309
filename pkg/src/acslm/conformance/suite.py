"""Suite assembly: run the full battery against a profile and report."""

import numpy as np

from ..audio import RNG_SCENE, amplitude_for_spl, seeded_rng
from ..micmodel import MicResponseModel
from ..pipeline import dut_pipeline, ideal_pipeline
from .battery import (
    compare_time_histories,
    test_frequency_weighting,
    test_level_linearity,
    test_self_noise,
    test_stability,
    test_toneburst,
)
from .report import TestReport, bounded_row


def bursty_signal(duration_s=60.0, rate=44100, seed=1):
    """Urban-flavored test signal: a pink noise bed with tone/noise bursts.

    Levels stay well above the default microphone noise floor so DUT and
    reference histories are comparable.
    """
    rng = seeded_rng(seed, RNG_SCENE)
    n = int(duration_s * rate)
    t = np.arange(n) / rate
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / rate)
    shape = np.ones_like(f)
    above = f >= 10.0
    shape[above] = np.sqrt(10.0 / f[above])
    spec *= shape
    spec[0] = 0.0
    bed = np.fft.irfft(spec, n)
    bed *= (amplitude_for_spl(60.0) / np.sqrt(2.0)) / np.sqrt(np.mean(bed**2))

    x = bed
    n_events = int(duration_s / 2.5)
    for _ in range(n_events):
        start = rng.uniform(0.0, duration_s - 1.5)
        length = rng.uniform(0.08, 1.0)
        level = rng.uniform(68.0, 86.0)
        freq = rng.uniform(120.0, 5000.0)
        m = (t >= start) & (t < start + length)
        burst_t = t[m] - start
        env = np.sin(np.pi * np.minimum(burst_t / length, 1.0)) ** 2
        x = x.copy()
        x[m] += amplitude_for_spl(level) * env * np.sin(2.0 * np.pi * freq * burst_t)
    return x


def time_history_report(dut, ref, duration_s=60.0, seed=1) -> TestReport:
    """Compare DUT vs reference histories on the bursty signal."""
    signal = bursty_signal(duration_s, dut.rate, seed)
    series_dut = dut.measure(signal)
    series_ref = ref.measure(signal)
    stats = compare_time_histories(series_dut, series_ref)
    rows = [
        bounded_row("r_squared", 1.0, stats["r_squared"], (0.0, 0.03)),
        bounded_row("mean |diff|", 0.0, abs(stats["mean_diff"]), (0.5, 0.0)),
        bounded_row("max |diff|", None, max(abs(stats["min_diff"]), abs(stats["max_diff"])), None),
    ]
    return TestReport(
        "time_history",
        rows,
        {"rate": dut.rate, "seed": seed, "duration_s": duration_s},
    )


def run_suite(
    profile="ideal",
    seed=1,
    rate=44100,
    quick=False,
    stability_duration_s=None,
):
    """Run the whole battery for a profile; returns a list of TestReports.

    ``quick`` shortens the stability hold and restricts linearity to 1 kHz
    for smoke runs; acceptance work uses the full defaults.
    """
    ref = ideal_pipeline(rate)
    if profile == "ideal":
        dut = ref
        noise_probe = ref
    elif profile == "dut":
        model = MicResponseModel(seed=seed)
        dut = dut_pipeline(rate, model)
        # the self-noise floor is a property of the capture front end; the
        # equalizer's band gains shift it and are characterized separately
        noise_probe = dut_pipeline(rate, model, compensation=None)
    else:
        raise ValueError(f"unknown profile {profile!r}")

    if stability_duration_s is None:
        stability_duration_s = 300.0 if quick else 1800.0
    lin_freqs = (1000.0,) if quick else None

    reports = [
        test_self_noise(noise_probe),
        test_frequency_weighting(dut, ref, seed=seed),
        test_stability(dut, duration_s=stability_duration_s),
        test_toneburst(dut),
        test_level_linearity(
            dut,
            freqs_hz=lin_freqs or (31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0),
            include_noise=not quick,
            seed=seed,
        ),
        time_history_report(dut, ref, seed=seed),
    ]
    return reports
