"""
Tests for dyadic B-splines, quasi-interpolation, the spline decomposition and
the spline coefficient norm.
"""

import math

import numpy as np
import pytest

from varbesov.analysis.splines import (
    SplineDecomposition,
    SplineLayer,
    bspline_eval,
    coeff_norm,
    dual_weights,
    fit_local_equivalence,
    quasi_interpolant,
    refine_layer,
    spline_decompose,
    spread_factor,
    subtract_layers,
    synthesize,
    verify_local_equivalence,
)
from varbesov.analysis.weights import make_weights
from varbesov.core.error_handling import GridError, ResolutionError, WeightError
from varbesov.core.grid import DyadicCube, GridFunction


class TestBSplines:
    """Cardinal B-splines on dyadic knots."""

    def test_hat_peak(self):
        assert bspline_eval(1, 0, [0], [1.0]) == pytest.approx(1.0)

    def test_outside_support(self):
        assert bspline_eval(2, 1, [0], [2.0]) == 0.0
        assert bspline_eval(2, 1, [0], [-0.1]) == 0.0

    @pytest.mark.parametrize("l", [0, 1, 2, 3, 4])
    def test_partition_of_unity(self, l):
        rng = np.random.default_rng(l)
        for k in (0, 2):
            x = rng.uniform(-1.5, 1.5, 20)
            base = np.floor(x * 2.0 ** k).astype(int)
            total = sum(bspline_eval(l, k, [0], (x * 2.0 ** k - (base - d))[:, None] / 2.0 ** k)
                        for d in range(l + 1))
            assert np.allclose(total, 1.0, atol=1e-12)

    def test_tensor_product(self):
        value = bspline_eval(1, 0, [0, 0], [1.0, 0.5])
        assert value == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(GridError):
            bspline_eval(1, 0, [0, 0], [1.0])


class TestSplineLayer:
    def setup_method(self):
        self.grid = GridFunction.zeros(1, 2.0, 7)
        self.layer = SplineLayer(1, 2, (-4,), np.array([1.0, -0.5, 0.25, 2.0, 0.0, -1.0]))

    def test_refinement_preserves_values(self):
        fine = refine_layer(self.layer)
        assert fine.k == 2
        assert np.allclose(fine.evaluate(self.grid).values, self.layer.evaluate(self.grid).values,
                           atol=1e-12)

    def test_subtract_from_itself(self):
        diff = subtract_layers(self.layer, self.layer)
        assert np.all(diff.coeffs == 0)

    def test_subtract_across_levels(self):
        with pytest.raises(GridError):
            subtract_layers(self.layer, refine_layer(self.layer))

    def test_json_round_trip(self):
        restored = SplineLayer.from_json(self.layer.to_json())
        assert np.allclose(restored.evaluate(self.grid).values,
                           self.layer.evaluate(self.grid).values)

    def test_coefficient_lookup(self):
        assert self.layer.coefficient((-3,)) == -0.5
        assert self.layer.coefficient((10,)) == 0.0


class TestQuasiInterpolant:
    """Q_k reproduces splines of its own level."""

    def setup_method(self):
        self.level = 7

    def test_dual_weights_sum_to_one(self):
        assert dual_weights(2, 16).sum() == pytest.approx(1.0, abs=1e-10)

    def test_constant_coefficients(self):
        f = GridFunction.from_function(lambda x: np.ones_like(x), 1, 2.0, self.level)
        layer = quasi_interpolant(f, 2, 2)
        assert np.allclose(layer.coeffs, 1.0, atol=1e-10)

    def test_linear_reproduction(self):
        f = GridFunction.from_function(lambda x: 0.3 + 0.7 * x, 1, 2.0, self.level)
        k, l = 2, 2
        values = quasi_interpolant(f, k, l).evaluate(f).values
        interior = np.abs(f.axis_points()) <= 2.0 - (l + 1) * 2.0 ** -k
        assert np.allclose(values[interior], f.values[interior], atol=1e-8)

    def test_recovers_spline_coefficients(self):
        original = SplineLayer(1, 2, (-4,), np.array([1.0, -0.5, 0.25, 2.0, 0.0, -1.0]))
        f = original.evaluate(GridFunction.zeros(1, 2.0, self.level))
        recovered = quasi_interpolant(f, 1, 2)
        for m in range(-4, 2):
            assert recovered.coefficient((m,)) == pytest.approx(original.coefficient((m,)),
                                                                abs=1e-8)

    def test_two_dimensional(self):
        f = GridFunction.from_function(lambda x, y: 1.0 + x * y, 2, 1.0, 5)
        values = quasi_interpolant(f, 1, 2).evaluate(f).values
        inner = np.abs(f.axis_points()) < 0.5
        assert np.allclose(values[np.ix_(inner, inner)], f.values[np.ix_(inner, inner)],
                           atol=1e-8)

    def test_resolution_margin(self):
        f = GridFunction.zeros(1, 2.0, 4)
        with pytest.raises(ResolutionError):
            quasi_interpolant(f, 2, 2)

    def test_box_not_on_knots(self):
        f = GridFunction.zeros(1, 0.25, 6)
        with pytest.raises(GridError):
            quasi_interpolant(f, 1, 2)


class TestDecomposition:
    def setup_method(self):
        self.level = 6
        self.spline = SplineLayer(0, 2, (-2,), np.array([1.0, -0.5]))
        self.f = self.spline.evaluate(GridFunction.zeros(1, 2.0, self.level))

    def test_level_zero_spline_has_no_finer_layers(self):
        dec = spline_decompose(self.f, 2, 2, 1.0)
        assert dec.K == 2
        for layer in dec.layers[1:]:
            assert np.max(np.abs(layer.coeffs)) <= 1e-8
        assert dec.residual_norm <= 1e-8

    def test_synthesis_returns_the_function(self):
        dec = spline_decompose(self.f, 2, 2, 1.0)
        assert np.allclose(synthesize(dec).values, self.f.values, atol=1e-8)

    def test_negative_level_cap(self):
        with pytest.raises(GridError):
            spline_decompose(self.f, 2, -1, 1.0)


class TestCoefficientNorm:
    def setup_method(self):
        self.grid = GridFunction.zeros(1, 2.0, 6)
        self.t = make_weights("two_ks", s=0.0, level=6, K=2)

    def test_single_coefficient(self):
        dec = SplineDecomposition((SplineLayer(0, 2, (0,), np.array([1.0])),), 0.0, self.grid)
        assert coeff_norm(dec, self.t, 2.0, 2.0).value == pytest.approx(1.0)

    def test_zero_and_homogeneity(self, bump_factory):
        f = bump_factory(level=6)
        dec = spline_decompose(f, 2, 2, 1.0)
        value = coeff_norm(dec, self.t, 2.0, 2.0).value
        assert value > 0
        assert coeff_norm(dec.scaled(2.0), self.t, 2.0, 2.0).value == pytest.approx(2.0 * value)
        assert coeff_norm(dec.scaled(0.0), self.t, 2.0, 2.0).value == 0.0

    def test_weights_too_short(self, bump_factory):
        dec = spline_decompose(bump_factory(level=6), 2, 3, 1.0)
        with pytest.raises(WeightError):
            coeff_norm(dec, self.t, 2.0, 2.0)


class TestLocalEquivalence:
    """Local coefficient / norm equivalence for splines of one level."""

    def setup_method(self):
        self.grid = GridFunction.zeros(1, 2.0, 7)

    def test_single_spline_middle_term(self):
        layer = SplineLayer(1, 2, (0,), np.array([1.0]))
        report = verify_local_equivalence(layer, 2.0, 1.0, DyadicCube(1, (0,)), self.grid)
        assert report.middle == pytest.approx(2.0 ** -0.5)
        assert report.lhs > 0
        assert all(report.check())

    def test_zero_spline(self):
        layer = SplineLayer(1, 2, (0,), np.array([0.0]))
        report = verify_local_equivalence(layer, 2.0, 1.0, DyadicCube(1, (0,)), self.grid)
        assert (report.lhs, report.middle, report.rhs) == (0.0, 0.0, 0.0)
        assert report.check() == (True, True)

    def test_cube_of_another_rank(self):
        layer = SplineLayer(1, 2, (0,), np.array([1.0]))
        with pytest.raises(GridError):
            verify_local_equivalence(layer, 2.0, 1.0, DyadicCube(0, (0,)), self.grid)

    def test_fitted_constants(self):
        c1, c2 = fit_local_equivalence(1, 2, 2.0, 1.0, trials=16)
        assert 0 < c1 < math.inf
        assert 0 < c2 < math.inf

    def test_spread_factor(self):
        assert spread_factor(2) == 5
