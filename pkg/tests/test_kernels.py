import numpy as np
import pytest
from scipy.signal import lfilter, sosfilt

from acslm.kernels import BACKEND, _reference

try:
    from acslm.kernels import _hot
except ImportError:
    _hot = None

needs_compiled = pytest.mark.skipif(_hot is None, reason="compiled kernels unavailable")

STABLE_SOS = np.array(
    [
        [0.8, -1.2, 0.4, 1.0, -1.1, 0.31],
        [1.1, 0.3, -0.2, 1.0, 0.4, 0.2],
        [0.5, 0.0, 0.1, 1.0, -0.2, 0.05],
    ]
)


def backends():
    out = [("reference", _reference)]
    if _hot is not None:
        out.append(("compiled", _hot))
    return out


def test_backend_selected():
    assert BACKEND in ("compiled", "reference")


@needs_compiled
def test_biquad_matches_scipy_and_reference():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50000)
    expected = sosfilt(STABLE_SOS, x)
    for name, impl in backends():
        zi = np.zeros((len(STABLE_SOS), 2))
        got = impl.biquad_cascade(np.ascontiguousarray(x), STABLE_SOS, zi)
        assert np.allclose(got, expected, atol=1e-10), name


@needs_compiled
def test_biquad_state_carries_chunks():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(30000)
    for name, impl in backends():
        zi = np.zeros((len(STABLE_SOS), 2))
        whole = impl.biquad_cascade(np.ascontiguousarray(x), STABLE_SOS, np.zeros((3, 2)))
        parts = []
        for chunk in np.split(x, [100, 5000, 5001, 20000]):
            parts.append(impl.biquad_cascade(np.ascontiguousarray(chunk), STABLE_SOS, zi))
        assert np.allclose(np.concatenate(parts), whole, atol=1e-12), name


@needs_compiled
def test_detector_matches_lfilter_oracle():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(44100)
    coeff = np.exp(-1.0 / (44100 * 0.125))
    oracle_env = lfilter([1.0 - coeff], [1.0, -coeff], x * x)
    for name, impl in backends():
        sampled, max_y, final, phase = impl.power_detect(
            np.ascontiguousarray(x), coeff, 0.0, 5512, 0
        )
        assert np.allclose(sampled, oracle_env[5511::5512], atol=1e-14), name
        assert max_y == pytest.approx(oracle_env.max(), rel=1e-12)
        assert final == pytest.approx(oracle_env[-1], rel=1e-12)
        assert phase == 44100 - (44100 // 5512) * 5512


@needs_compiled
def test_detector_chunking_preserves_phase():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(20000)
    coeff = 0.999
    for name, impl in backends():
        whole = impl.power_detect(np.ascontiguousarray(x), coeff, 0.0, 777, 0)
        state, phase, collected = 0.0, 0, []
        max_seen = -1.0
        for chunk in np.split(x, [1, 500, 501, 12000]):
            s, m, state, phase = impl.power_detect(
                np.ascontiguousarray(chunk), coeff, state, 777, phase
            )
            collected.append(s)
            max_seen = max(max_seen, m)
        assert np.allclose(np.concatenate(collected), whole[0], atol=1e-14), name
        assert max_seen == pytest.approx(whole[1], rel=1e-12)
        assert phase == whole[3]


def test_detector_empty_chunk():
    sampled, max_y, final, phase = _reference.power_detect(
        np.empty(0), 0.99, 1.5, 10, 3
    )
    assert len(sampled) == 0
    assert final == 1.5
    assert phase == 3


def test_read_only_coefficients_accepted():
    # cached filter designs share a read-only coefficient array
    sos = STABLE_SOS.copy()
    sos.setflags(write=False)
    x = np.linspace(-0.5, 0.5, 2000)
    x.setflags(write=False)
    expected = sosfilt(STABLE_SOS, x)
    for name, impl in backends():
        got = impl.biquad_cascade(x, sos, np.zeros((len(sos), 2)))
        assert np.allclose(got, expected, atol=1e-12), name
