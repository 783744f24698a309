"""Magnitude response curves: the shared representation for microphone
responses, design targets and measurement results."""

from dataclasses import dataclass

import numpy as np

from .errors import AcslmError


@dataclass
class MagnitudeResponse:
    """Levels in dB over an ascending frequency grid, 0 dB at the reference
    frequency after normalization."""

    freqs_hz: np.ndarray
    levels_db: np.ndarray
    ref_freq_hz: float = 1000.0

    def __post_init__(self):
        self.freqs_hz = np.asarray(self.freqs_hz, dtype=np.float64)
        self.levels_db = np.asarray(self.levels_db, dtype=np.float64)
        if self.freqs_hz.shape != self.levels_db.shape:
            raise AcslmError("frequency and level grids must match")
        if len(self.freqs_hz) < 2:
            raise AcslmError("response needs at least two grid points")
        if np.any(np.diff(self.freqs_hz) <= 0):
            raise AcslmError("frequency grid must be strictly ascending")
        if not (np.all(np.isfinite(self.freqs_hz)) and np.all(np.isfinite(self.levels_db))):
            raise AcslmError("response values must be finite")
        if np.any(self.freqs_hz <= 0):
            raise AcslmError("frequencies must be positive")

    def __len__(self):
        return len(self.freqs_hz)

    @property
    def f_lo(self):
        return float(self.freqs_hz[0])

    @property
    def f_hi(self):
        return float(self.freqs_hz[-1])

    def level_at(self, freqs_hz, extrapolate=False, clamp_db=60.0):
        """Interpolate levels (linear in log-frequency).

        Out-of-grid queries either clamp to the edge values or, with
        ``extrapolate=True``, continue the edge slope limited to +-clamp_db.
        """
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        logf = np.log(np.maximum(f, 1e-12))
        glog = np.log(self.freqs_hz)
        out = np.interp(logf, glog, self.levels_db)
        if extrapolate:
            lo = f < self.freqs_hz[0]
            hi = f > self.freqs_hz[-1]
            if np.any(lo):
                slope = (self.levels_db[1] - self.levels_db[0]) / (glog[1] - glog[0])
                out[lo] = self.levels_db[0] + slope * (logf[lo] - glog[0])
            if np.any(hi):
                slope = (self.levels_db[-1] - self.levels_db[-2]) / (glog[-1] - glog[-2])
                out[hi] = self.levels_db[-1] + slope * (logf[hi] - glog[-1])
            np.clip(out, -clamp_db, clamp_db, out=out)
        if np.isscalar(freqs_hz):
            return float(out[0])
        return out

    def normalized(self):
        """Copy with 0 dB at the reference frequency."""
        ref = self.level_at(self.ref_freq_hz)
        return MagnitudeResponse(
            self.freqs_hz.copy(), self.levels_db - ref, self.ref_freq_hz
        )

    def resampled(self, freqs_hz):
        freqs_hz = np.asarray(freqs_hz, dtype=np.float64)
        return MagnitudeResponse(freqs_hz, self.level_at(freqs_hz), self.ref_freq_hz)

    def to_csv(self, path_or_file):
        def _write(fh):
            fh.write("freq_hz,db\n")
            for f, db in zip(self.freqs_hz, self.levels_db):
                fh.write(f"{f:.6f},{db:.6f}\n")

        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "w") as fh:
                _write(fh)
        else:
            _write(path_or_file)

    @classmethod
    def from_csv(cls, path_or_file, ref_freq_hz=1000.0):
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file)
            close = True
        else:
            fh, close = path_or_file, False
        try:
            header = fh.readline().strip()
            if header != "freq_hz,db":
                raise AcslmError(f"unexpected response header {header!r}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        finally:
            if close:
                fh.close()
        freqs = np.array([float(r[0]) for r in rows])
        levels = np.array([float(r[1]) for r in rows])
        return cls(freqs, levels, ref_freq_hz)


def flat_response(f_lo=20.0, f_hi=20000.0, n=2):
    """A 0 dB reference curve."""
    return MagnitudeResponse(np.geomspace(f_lo, f_hi, max(n, 2)), np.zeros(max(n, 2)))
