import json
import math

import numpy as np
import pytest

from varbesov.analysis.convolution import build_mollifier
from varbesov.analysis.weights import WeightSequence, make_weights
from varbesov.config import (
    CorpusConfig,
    ExperimentConfig,
    MollifierConfig,
    NormParams,
    NormSpec,
)
from varbesov.core.error_handling import GridError, HypothesisError
from varbesov.core.grid import GridFunction
from varbesov.core.models import RatioSummary
from varbesov.experiments.corpus import generate_corpus
from varbesov.experiments.harness import (
    EMBED_MAX_RATE,
    REPORT_HEADER,
    EmbeddingReport,
    EquivalenceReport,
    PairSummary,
    TraceRunReport,
    embedding_run,
    equivalence_run,
    norm_params,
    normal_power_weight,
    tail_rate,
    weights_at,
    write_report,
)


class TestHelpers:
    def test_norm_params_overrides(self):
        params = norm_params(NormSpec(kind="diff", l=3), NormParams(r=2.0))
        assert params.l == 3
        assert params.r == 2.0

    def test_weights_at_regenerates(self):
        t = make_weights("two_ks", s=0.5, level=8, K=3)
        moved = weights_at(t, GridFunction.zeros(1, 2.0, 7))
        assert moved.grid.level == 7
        assert weights_at(t, t.grid) is t

    def test_weights_at_needs_a_recipe(self):
        level = GridFunction.zeros(1, 2.0, 6).with_values(np.ones(256))
        t = WeightSequence((level,), 2.0, 2.0, 2.0, (1.0,), (1.0,), 0.0)
        with pytest.raises(GridError):
            weights_at(t, GridFunction.zeros(1, 2.0, 7))

    def test_tail_rate(self):
        assert tail_rate([1.0, 0.5, 0.25]) == pytest.approx(0.5)
        assert tail_rate([0.1, 1.0, 0.5, 0.25]) == pytest.approx(0.5)
        assert math.isnan(tail_rate([]))

    def test_normal_power_weight(self):
        grid = GridFunction.zeros(2, 2.0, 4)
        assert np.all(normal_power_weight(grid, 0.0).values == 1.0)
        w = normal_power_weight(grid, 1.0)
        y = grid.axis_points()
        assert np.allclose(w.values, np.broadcast_to(np.abs(y), grid.shape))


class TestPairSummary:
    def test_drift(self):
        pair = PairSummary("conv", "diff", RatioSummary((1.0, 2.0)), RatioSummary((1.0, 2.2)))
        assert pair.spread == 2.0
        assert pair.drift == pytest.approx(0.1)
        assert pair.passed(0.15)
        assert not pair.passed(0.05)

    def test_single_level_never_passes(self):
        pair = PairSummary("conv", "diff", RatioSummary((1.0, 2.0)))
        assert math.isnan(pair.drift)
        assert not pair.passed(0.15)

    def test_vanishing_ratio_has_infinite_spread(self):
        assert PairSummary.spread_of(RatioSummary((0.0, 1.0))) == math.inf


class TestTraceRunReport:
    def test_drift_of_the_largest_ratio(self):
        report = TraceRunReport({6: {"a": 1.0, "b": 2.0}, 7: {"a": 1.1, "b": 2.2}})
        assert report.levels == [6, 7]
        assert report.bound(7) == 2.2
        assert report.drift == pytest.approx(0.1)
        assert report.passed

    def test_infinite_ratio_fails(self):
        assert not TraceRunReport({6: {"a": math.inf}, 7: {"a": 1.0}}).passed


class TestEquivalenceGate:
    """Unit weights have smoothness 0, where the difference norm is not equivalent."""

    def setup_method(self):
        self.corpus = generate_corpus(CorpusConfig(seed=2, count=2, level=6))
        self.weights = make_weights("two_ks", s=0.0, level=6, K=2)
        self.config = ExperimentConfig(schema=1, params=NormParams(K=2), refine=False)
        self.norms = [NormSpec(kind="diff")]

    def test_refused(self):
        with pytest.raises(HypothesisError) as info:
            equivalence_run(self.corpus, self.norms, self.weights, self.config)
        assert any("[diff]" in v.condition for v in info.value.violations)

    def test_forced_run_is_unsafe(self):
        report = equivalence_run(self.corpus, self.norms, self.weights, self.config, force=True)
        assert report.unsafe
        assert report.violations
        assert report.verdict == "FAIL"
        assert len(report.rows) == 2
        assert all(math.isfinite(row[2]) for row in report.rows)
        assert "diff" in report.timings

    def test_duplicate_labels(self):
        with pytest.raises(GridError):
            equivalence_run(self.corpus, self.norms * 2, self.weights, self.config, force=True)


class TestWriteReport:
    def test_files(self, tmp_path):
        report = EquivalenceReport(
            rows=[("bumps_000", "diff", 1.5, 2, 6, 0.25)],
            pairs=[PairSummary("conv", "diff", RatioSummary((1.0, math.inf)))],
            verdict="FAIL",
        )
        path = write_report(report, tmp_path / "out")
        assert path.read_text() == ",".join(REPORT_HEADER) + "\nbumps_000,diff,1.5,2,6,0.25\n"
        sidecar = json.loads((tmp_path / "out" / "report.json").read_text())
        assert sidecar["verdict"] == "FAIL"
        assert sidecar["pairs"][0]["high"] == "inf"
        assert sidecar["pairs"][0]["drift"] == "nan"


class TestMollifierGate:
    """A mollifier with too few vanishing moments for the smoothness is refused."""

    def setup_method(self):
        self.corpus = generate_corpus(CorpusConfig(seed=4, count=2, level=7))
        self.weights = make_weights("two_ks", s=2.5, level=7, K=2)
        self.config = ExperimentConfig(schema=1, params=NormParams(K=2), refine=False)
        self.norms = [NormSpec(kind="conv", mollifier=MollifierConfig(M=0)),
                      NormSpec(kind="conv", mollifier=MollifierConfig(M=4))]

    def test_small_moment_order_is_refused(self):
        with pytest.raises(HypothesisError) as info:
            equivalence_run(self.corpus, self.norms, self.weights, self.config)
        conditions = [v.condition for v in info.value.violations]
        assert any(c.startswith("[conv_M0]") and "L_phi" in c for c in conditions)
        assert not any(c.startswith("[conv_M4]") for c in conditions)

    def test_enough_moments_pass_the_gate(self):
        report = equivalence_run(self.corpus, self.norms[1:], self.weights, self.config)
        assert not report.unsafe
        assert report.violations == []


class TestEmbeddingReport:
    def setup_method(self):
        self.rates = {8: {"a": 0.2, "b": 0.3}, 9: {"a": 0.21, "b": 0.3}}
        self.reconstruction = {8: {"a": 1e-3, "b": 2e-3}, 9: {"a": 5e-4, "b": 1e-3}}

    def report(self, **changes) -> EmbeddingReport:
        fields = {"rows": [], "rates": self.rates, "reconstruction": self.reconstruction}
        fields.update(changes)
        return EmbeddingReport(**fields)

    def test_pass(self):
        report = self.report()
        assert report.failures == []
        assert report.verdict == "PASS"
        assert report.rate_drift("a") == pytest.approx(0.05)

    def test_single_level_never_passes(self):
        report = self.report(rates={8: self.rates[8]},
                             reconstruction={8: self.reconstruction[8]})
        assert report.failures == ["only one grid level was evaluated"]
        assert math.isnan(report.rate_drift("a"))

    @pytest.mark.parametrize("rate", [math.nan, math.inf, EMBED_MAX_RATE + 0.01])
    def test_bad_rates_fail(self, rate):
        report = self.report(rates={8: {"a": rate, "b": 0.3}, 9: {"a": 0.2, "b": 0.3}})
        assert not report.passed
        assert any(reason.startswith("a: decay rate") for reason in report.failures)

    def test_rate_drift_fails(self):
        report = self.report(rates={8: {"a": 0.2, "b": 0.3}, 9: {"a": 0.1, "b": 0.3}})
        assert report.failures == ["a: decay rate drifts by 0.5 from J=8 to J=9"]

    def test_growing_reconstruction_error_fails(self):
        report = self.report(reconstruction={8: {"a": 1e-3, "b": 2e-3},
                                             9: {"a": 2e-3, "b": 1e-3}})
        assert len(report.failures) == 1
        assert report.failures[0].startswith("a: reconstruction error grows")

    def test_missing_fine_value_fails(self):
        report = self.report(reconstruction={8: self.reconstruction[8], 9: {"b": 1e-3}})
        assert not report.passed

    def test_write_report(self, tmp_path):
        write_report(self.report(), tmp_path)
        sidecar = json.loads((tmp_path / "report.json").read_text())
        assert sidecar["verdict"] == "PASS"
        assert sidecar["rates"]["9"]["a"] == 0.21
        assert sidecar["failures"] == []


class TestEmbeddingRun:
    def setup_method(self):
        self.level = 8
        self.corpus = generate_corpus(CorpusConfig(seed=5, count=2, level=self.level))
        self.weights = make_weights("two_ks", s=0.5, level=self.level, K=3)
        self.mol = build_mollifier(1, 2, 0.5, self.level)

    def test_runs_at_two_levels(self):
        config = ExperimentConfig(schema=1, params=NormParams(K=3))
        report = embedding_run(self.corpus, self.weights, self.mol, 1.0, config)
        assert report.levels == [self.level, self.level + 1]
        assert not report.errors
        assert len(report.rows) == 8
        assert {row[1] for row in report.rows} == {"decay_rate", "reconstruction_error"}
        recon_layers = {row[4]: row[3] for row in report.rows if row[1] == "reconstruction_error"}
        assert recon_layers == {self.level: 3, self.level + 1: 4}
        for entry in self.corpus:
            coarse = report.reconstruction[self.level][entry.id]
            assert report.reconstruction[self.level + 1][entry.id] < coarse
            assert math.isfinite(report.rate_drift(entry.id))

    def test_without_refinement_fails(self):
        config = ExperimentConfig(schema=1, params=NormParams(K=3), refine=False)
        report = embedding_run(self.corpus, self.weights, self.mol, 1.0, config)
        assert report.levels == [self.level]
        assert report.verdict == "FAIL"

    def test_mollifier_on_another_level(self):
        config = ExperimentConfig(schema=1, params=NormParams(K=3), refine=False)
        with pytest.raises(GridError):
            embedding_run(self.corpus, self.weights, build_mollifier(1, 2, 0.5, 9), 1.0, config)

    def test_r_below_one_is_refused(self):
        config = ExperimentConfig(schema=1, params=NormParams(K=3), refine=False)
        with pytest.raises(HypothesisError):
            embedding_run(self.corpus, self.weights, self.mol, 0.5, config)
