"""Tolerance bookkeeping.

Class 1 and class 2 meters have per-test tolerance bounds. When a class 1
reference instrument stands in for the true level, the acceptable class 2
window shrinks by the reference's own bounds: per side, adjusted = class 2
bound minus class 1 bound. Bounds are (plus, minus) magnitudes in dB, e.g.
(1.0, 1.5) means +1.0/-1.5.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConformanceError


def _as_bounds(b):
    """Accept a scalar (symmetric) or a (plus, minus) pair of magnitudes."""
    if np.isscalar(b):
        return float(b), float(b)
    plus, minus = b
    return float(plus), float(minus)


def adjusted_tolerance(type1, type2):
    """Per-side subtraction of the reference's bounds from the DUT class bounds."""
    p1, m1 = _as_bounds(type1)
    p2, m2 = _as_bounds(type2)
    if p2 < p1 or m2 < m1:
        raise ConformanceError(
            f"class 1 bounds (+{p1},-{m1}) wider than class 2 (+{p2},-{m2})"
        )
    return (p2 - p1, m2 - m1)


@dataclass(frozen=True)
class ToleranceSpec:
    """Bounds for one test row."""

    type1_bounds_db: tuple
    type2_bounds_db: tuple

    @property
    def adjusted_bounds_db(self):
        return adjusted_tolerance(self.type1_bounds_db, self.type2_bounds_db)


# Adjusted bounds for the steady-tone frequency-weighting rows, by octave.
FREQ_WEIGHTING_ADJUSTED_DB = {
    31.5: 1.5,
    63.0: 1.0,
    125.0: 0.5,
    250.0: 0.5,
    500.0: 0.5,
    1000.0: 0.3,
    2000.0: 1.0,
    4000.0: 2.0,
    8000.0: 3.0,
}

# Class 2 toneburst bounds (plus, minus) by burst duration in ms.
TONEBURST_BOUNDS_DB = {
    1000.0: (1.0, 1.0),
    500.0: (1.0, 1.0),
    200.0: (1.0, 1.0),
    100.0: (1.0, 1.0),
    50.0: (1.0, 1.5),
    20.0: (1.0, 2.0),
    10.0: (1.0, 2.0),
    5.0: (1.0, 2.5),
    2.0: (1.0, 2.5),
    1.0: (1.0, 3.0),
    0.5: (1.0, 4.0),
    0.25: (1.5, 5.0),
}

# Adjusted level-linearity bound at 1 kHz.
LINEARITY_ADJUSTED_DB = 0.6

# Long-term stability allowance (class 2).
STABILITY_TOL_DB = 0.2
