"""Test reports: structured rows, JSON document, rendered table.

Reports are byte-deterministic for a given seed: floats are rounded before
serialization and no wall-clock timestamps are embedded.
"""

import json
from dataclasses import dataclass, field

SUITE_VERSION = "1.0"


def _r(x, nd=4):
    if x is None:
        return None
    return round(float(x), nd)


@dataclass
class TestRow:
    __test__ = False  # not a pytest class despite the name

    stimulus: str
    expected: float | None
    measured: float | None
    delta: float | None
    bound_lo: float | None  # signed lower bound on delta
    bound_hi: float | None
    passed: bool
    note: str = ""

    def to_dict(self):
        return {
            "stimulus": self.stimulus,
            "expected": _r(self.expected),
            "measured": _r(self.measured),
            "delta": _r(self.delta),
            "bound_lo": _r(self.bound_lo),
            "bound_hi": _r(self.bound_hi),
            "pass": bool(self.passed),
            "note": self.note,
        }


def bounded_row(stimulus, expected, measured, bound, note=""):
    """Row whose delta = measured - expected is checked against bounds.

    ``bound`` is a symmetric magnitude, a (plus, minus) pair of magnitudes,
    or None for an informational row that always passes.
    """
    expected = None if expected is None else float(expected)
    measured = None if measured is None else float(measured)
    delta = None if expected is None or measured is None else measured - expected
    if bound is None:
        return TestRow(stimulus, expected, measured, delta, None, None, True, note)
    if isinstance(bound, tuple):
        plus, minus = (float(b) for b in bound)
    else:
        plus = minus = float(bound)
    passed = delta is not None and -minus - 1e-12 <= delta <= plus + 1e-12
    return TestRow(stimulus, expected, measured, delta, -minus, plus, bool(passed), note)


@dataclass
class TestReport:
    __test__ = False  # not a pytest class despite the name

    test_id: str
    rows: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def to_dict(self):
        return {
            "id": self.test_id,
            "rows": [r.to_dict() for r in self.rows],
            "pass": self.passed,
            "environment": self.environment,
        }


def emit_report(reports, seed=None, fh=None):
    """Assemble the JSON document and (optionally) write it.

    Returns the document dict; the rendered table is available through
    :func:`render_table`.
    """
    doc = {
        "suite_version": SUITE_VERSION,
        "seed": seed,
        "tests": [r.to_dict() for r in reports],
        "overall_pass": all(r.passed for r in reports),
    }
    if fh is not None:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def render_table(reports):
    """Human-readable table; '*' marks rows meeting their criteria."""
    lines = []
    for rep in reports:
        lines.append(f"== {rep.test_id} ==")
        lines.append(
            f"{'stimulus':<42} {'expected':>10} {'measured':>10} "
            f"{'delta':>8} {'bounds':>16}  met"
        )
        for row in rep.rows:
            exp = "-" if row.expected is None else f"{row.expected:.2f}"
            mea = "-" if row.measured is None else f"{row.measured:.2f}"
            dlt = "-" if row.delta is None else f"{row.delta:+.2f}"
            if row.bound_lo is None:
                bounds = "n/a"
            else:
                bounds = f"{row.bound_lo:+.2f}/{row.bound_hi:+.2f}"
            mark = "*" if row.passed else " "
            note = f"  ({row.note})" if row.note else ""
            lines.append(f"{row.stimulus:<42} {exp:>10} {mea:>10} {dlt:>8} {bounds:>16}  {mark}{note}")
        lines.append(f"-- {'PASS' if rep.passed else 'FAIL'}")
        lines.append("")
    if reports:
        overall = all(r.passed for r in reports)
        lines.append(f"overall: {'PASS' if overall else 'FAIL'} (* indicates criteria met)")
    return "\n".join(lines) + "\n"
