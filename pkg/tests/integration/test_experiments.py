"""
End-to-end experiments at two grid levels. Marked slow.
"""

import math

import numpy as np
import pytest

from varbesov.analysis.convolution import build_mollifier, conv_field, reconstruction_error
from varbesov.analysis.splines import spline_decompose, synthesize
from varbesov.analysis.weights import make_weights
from varbesov.config import (
    CorpusConfig,
    ExperimentConfig,
    MollifierConfig,
    NormParams,
    NormSpec,
)
from varbesov.experiments.corpus import generate_corpus
from varbesov.experiments.harness import embedding_run, equivalence_run, trace_run


@pytest.mark.slow
class TestEquivalence:
    def setup_method(self):
        self.config = ExperimentConfig(
            schema=1,
            corpus=CorpusConfig(seed=7, count=6, families=["bumps", "modulated_bumps"], level=9),
            params=NormParams(K=3),
        )
        self.weights = make_weights("two_ks", s=0.5, level=9, K=3)

    def test_convolution_difference_and_spline_norms_agree(self):
        corpus = generate_corpus(self.config.corpus)
        norms = [NormSpec(kind="conv"), NormSpec(kind="diff"), NormSpec(kind="spline")]
        report = equivalence_run(corpus, norms, self.weights, self.config)
        assert not report.unsafe
        assert report.verdict == "PASS", report.to_dict()
        assert [pair.norm_a + "/" + pair.norm_b for pair in report.pairs] == [
            "conv/diff", "conv/spline", "diff/spline"
        ]
        for pair in report.pairs:
            assert pair.fine is not None
            assert 1.0 <= pair.spread < math.inf

    def test_fourier_norm_agrees_with_convolution(self):
        corpus = generate_corpus(self.config.corpus)
        norms = [NormSpec(kind="conv"), NormSpec(kind="fourier")]
        report = equivalence_run(corpus, norms, self.weights, self.config)
        assert report.verdict == "PASS", report.to_dict()
        assert report.pairs[0].spread < 10.0


@pytest.mark.slow
class TestMollifierIndependence:
    """Two mollifiers and the barred weights, for t_k = 2^{ks} gamma with gamma in {1, |x|^1/4}."""

    @pytest.mark.parametrize("kind, beta", [("two_ks", 0.0), ("power_times_2ks", 0.25)])
    def test_ratio_spreads_are_refinement_stable(self, kind, beta):
        config = ExperimentConfig(
            schema=1,
            corpus=CorpusConfig(seed=13, count=10, families=["bumps", "modulated_bumps"],
                                level=9),
            params=NormParams(K=3),
        )
        weights = make_weights(kind, s=0.5, beta=beta, level=9, K=3)
        norms = [NormSpec(kind="conv"),
                 NormSpec(kind="conv", mollifier=MollifierConfig(M=4)),
                 NormSpec(kind="conv", bar=True)]
        report = equivalence_run(generate_corpus(config.corpus), norms, weights, config)
        assert not report.unsafe
        assert report.verdict == "PASS", report.to_dict()
        for pair in report.pairs:
            assert len(pair.coarse.ratios) == 10
            assert 1.0 <= pair.spread < math.inf
            assert pair.drift < config.pass_drift


@pytest.mark.slow
class TestSplineCorpus:
    def test_partial_sums_reconstruct_the_splines(self):
        corpus = generate_corpus(CorpusConfig(seed=3, count=4, families=["random_splines"],
                                              level=9))
        mol = build_mollifier(1, 2, 0.5, 9)
        for f in corpus.functions:
            dec = spline_decompose(f, 2, 3, 1.0)
            assert dec.residual_norm <= 1e-8
            assert np.allclose(synthesize(dec).values, f.values, atol=1e-8)
            errors = [reconstruction_error(f, conv_field(f, mol, K), 1.0) for K in (2, 4, 6)]
            assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
class TestEmbedding:
    def test_tail_blocks_decay_geometrically(self):
        config = ExperimentConfig(
            schema=1,
            corpus=CorpusConfig(seed=5, count=4, families=["bumps", "random_splines"], level=9),
            params=NormParams(K=5),
        )
        corpus = generate_corpus(config.corpus)
        t = make_weights("two_ks", s=0.5, level=9, K=5)
        mol = build_mollifier(1, 2, 0.5, 9)
        report = embedding_run(corpus, t, mol, 1.0, config)
        assert report.levels == [9, 10]
        assert report.passed, report.failures
        for level in report.levels:
            assert all(err < 0.1 for err in report.reconstruction[level].values())
            assert all(rate <= 0.75 for rate in report.rates[level].values())


@pytest.mark.slow
class TestTrace:
    def test_ratio_is_stable_under_refinement(self):
        config = CorpusConfig(seed=3, dim=2, count=3, level=6)
        report = trace_run(config, 2.0, 2, 2)
        assert report.levels == [6, 7]
        assert all(0 < ratio < math.inf for ratio in report.ratios[6].values())
        assert report.passed
