"""Virtual IEC 61672-3 style conformance battery."""

from .battery import (
    compare_time_histories,
    test_frequency_weighting,
    test_level_linearity,
    test_self_noise,
    test_stability,
    test_toneburst,
)
from .report import TestReport, TestRow, emit_report
from .stimuli import StimulusSpec, gen_stimulus
from .suite import run_suite
from .tolerances import ToleranceSpec, adjusted_tolerance

__all__ = [
    "StimulusSpec",
    "TestReport",
    "TestRow",
    "ToleranceSpec",
    "adjusted_tolerance",
    "compare_time_histories",
    "emit_report",
    "gen_stimulus",
    "run_suite",
    "test_frequency_weighting",
    "test_level_linearity",
    "test_self_noise",
    "test_stability",
    "test_toneburst",
]
