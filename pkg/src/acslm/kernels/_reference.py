"""Reference kernels backed by scipy, used when the compiled extension is
unavailable (or forced via ``ACSLM_KERNELS=reference``)."""

import numpy as np
from scipy.signal import lfilter, sosfilt


def biquad_cascade(x, sos, zi):
    """Filter ``x`` through a biquad cascade, updating ``zi`` in place."""
    sos = np.asarray(sos)
    if not sos.flags.writeable:
        sos = sos.copy()  # sosfilt rejects read-only coefficient buffers
    y, zf = sosfilt(sos, x, zi=zi)
    zi[...] = zf
    return y


def power_detect(x, coeff, state, step, phase):
    """One-pole exponential average of the squared input.

    Same contract as the compiled kernel: returns (sampled, max_y,
    final_state, new_phase) where ``sampled`` holds every ``step``-th
    envelope value given ``phase`` samples already consumed.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    # lfilter's initial condition zi equals coeff * y[-1] for this topology
    env, _ = lfilter([1.0 - coeff], [1.0, -coeff], x * x, zi=[coeff * state])
    if n == 0:
        return np.empty(0), -1.0, state, phase
    first = step - 1 - phase
    sampled = env[first::step].copy() if first < n else np.empty(0)
    new_phase = (phase + n) % step
    return sampled, float(env.max()), float(env[-1]), new_phase
