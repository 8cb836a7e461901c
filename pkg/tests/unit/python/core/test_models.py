"""
Tests for result records, the error hierarchy and the small utilities.
"""

import math

import pytest

from varbesov.core.error_handling import (
    ErrorLog,
    ErrorSeverity,
    HypothesisError,
    HypothesisViolation,
    MollifierError,
    ResolutionError,
    VarBesovError,
)
from varbesov.core.models import NormValue, RatioSummary
from varbesov.utils import format_float, parallel_map, write_csv


class TestNormValue:
    def test_q_sum_and_tail_fraction(self):
        value = NormValue.from_terms([3.0, 4.0], 2.0)
        assert value.value == pytest.approx(5.0)
        assert value.tail_fraction == pytest.approx(16.0 / 25.0)

    def test_zero_order_is_added(self):
        value = NormValue.from_terms([1.0], 1.0, zero_order=0.5)
        assert value.value == 1.5
        assert float(value) == 1.5

    def test_sup_norm(self):
        value = NormValue.from_terms([1.0, 4.0, 2.0], math.inf)
        assert value.value == 4.0
        assert value.tail_fraction == 0.5

    def test_all_zero_terms(self):
        value = NormValue.from_terms([0.0, 0.0], 2.0)
        assert value.value == 0.0
        assert value.tail_fraction == 0.0


class TestRatioSummary:
    def test_zero_pairs_are_skipped(self):
        summary = RatioSummary.from_pairs([(0.0, 0.0), (2.0, 1.0), (1.0, 2.0)])
        assert summary.skipped == 1
        assert summary.low == 0.5
        assert summary.high == 2.0
        assert summary.constant == 2.0

    def test_zero_denominator(self):
        summary = RatioSummary.from_pairs([(1.0, 0.0)])
        assert summary.high == math.inf

    def test_empty(self):
        assert math.isnan(RatioSummary.from_pairs([]).constant)


class TestErrors:
    def test_context_carries_recovery_hint(self):
        exc = ResolutionError("too coarse")
        assert isinstance(exc, VarBesovError)
        assert exc.context.severity is ErrorSeverity.HIGH
        assert "grid level" in exc.context.recovery_suggestion

    def test_hypothesis_error_message_lists_violations(self):
        violations = [HypothesisViolation("r <= p", "r = 3, p = 2"),
                      HypothesisViolation("A > 0", "A = -1", -1.0)]
        exc = HypothesisError(violations, component="convolution")
        assert "r <= p" in str(exc)
        assert "value -1" in str(exc)
        assert exc.context.component == "convolution"

    def test_mollifier_error_keeps_condition_number(self):
        exc = MollifierError("ill-conditioned", condition_number=1e14)
        assert exc.condition_number == 1e14

    def test_error_log(self):
        log = ErrorLog()
        log.record(ResolutionError("level 9"))
        assert len(log) == 1
        assert log.entries[0].error_type == "ResolutionError"


class TestUtils:
    def test_format_float(self):
        assert format_float(0.1) == "0.1"
        assert format_float(math.inf) == "inf"
        assert format_float(math.nan) == "nan"

    def test_parallel_map_keeps_order(self, monkeypatch):
        monkeypatch.setenv("VARBESOV_THREADS", "4")
        assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]

    def test_write_csv(self, tmp_path):
        path = write_csv(tmp_path / "out" / "r.csv", ("a", "b"), [("x", 0.25), ("y", math.inf)])
        assert path.read_text() == "a,b\nx,0.25\ny,inf\n"
