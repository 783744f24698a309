# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: biquad cascade filtering and the squared-signal
exponential detector. Both are strictly sequential recursions, which is why
they live here rather than in vectorized numpy."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


DEF MAX_SECTIONS = 16


def biquad_cascade(const double[::1] x, const double[:, ::1] sos, double[:, ::1] zi):
    """Filter ``x`` through a cascade of transposed direct-form II biquads.

    ``sos`` is an (n_sections, 6) array of [b0, b1, b2, 1, a1, a2] rows;
    ``zi`` is the (n_sections, 2) running state, updated in place.
    Returns the filtered signal. One pass over the samples with the
    coefficients and states held in registers/stack.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_sections = sos.shape[0]
    if n_sections > MAX_SECTIONS:
        raise ValueError(f"at most {MAX_SECTIONS} sections supported")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, s
    cdef double v, y
    cdef double b0[MAX_SECTIONS]
    cdef double b1[MAX_SECTIONS]
    cdef double b2[MAX_SECTIONS]
    cdef double a1[MAX_SECTIONS]
    cdef double a2[MAX_SECTIONS]
    cdef double z0[MAX_SECTIONS]
    cdef double z1[MAX_SECTIONS]

    for s in range(n_sections):
        b0[s] = sos[s, 0]; b1[s] = sos[s, 1]; b2[s] = sos[s, 2]
        a1[s] = sos[s, 4]; a2[s] = sos[s, 5]
        z0[s] = zi[s, 0]; z1[s] = zi[s, 1]
    for i in range(n):
        v = x[i]
        for s in range(n_sections):
            y = b0[s] * v + z0[s]
            z0[s] = b1[s] * v - a1[s] * y + z1[s]
            z1[s] = b2[s] * v - a2[s] * y
            v = y
        out[i] = v
    for s in range(n_sections):
        zi[s, 0] = z0[s]; zi[s, 1] = z1[s]
    return out_arr


def power_detect(const double[::1] x, double coeff, double state, Py_ssize_t step,
                 Py_ssize_t phase):
    """One-pole exponential average of the squared input.

    y[i] = coeff * y[i-1] + (1 - coeff) * x[i]**2, seeded with ``state``.
    Emits y every ``step`` samples (``phase`` samples of the current interval
    were already consumed by earlier chunks) and tracks the running maximum.

    Returns (sampled, max_y, final_state, new_phase).
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_out = (phase + n) // step
    out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k = 0, ph = phase
    cdef double y = state, g = 1.0 - coeff, max_y = -1.0, v

    for i in range(n):
        v = x[i]
        y = coeff * y + g * v * v
        if y > max_y:
            max_y = y
        ph += 1
        if ph == step:
            out[k] = y
            k += 1
            ph = 0
    return out_arr, max_y, y, ph
