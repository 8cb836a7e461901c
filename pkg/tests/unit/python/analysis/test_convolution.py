"""
Tests for mollifiers with vanishing moments and the convolution quasi-norm.
"""

import math

import numpy as np
import pytest

from varbesov.analysis.convolution import (
    ConvField,
    block_increments,
    build_mollifier,
    conv_field,
    conv_norm,
    geometric_rate,
    load_mollifier,
    maximal_field,
    reconstruction_error,
    save_mollifier,
    verify_bar_invariance,
    verify_maximal_bound,
    verify_mollifier_independence,
    verify_weighted_maximal,
)
from varbesov.analysis.weights import make_weights
from varbesov.config import NormParams
from varbesov.core.error_handling import ExponentError, GridError, MollifierError
from varbesov.core.grid import GridFunction
from tests.conftest import smooth_bump


class TestMollifier:
    """phi0 moments, the difference kernel and persistence."""

    def setup_method(self):
        self.mol = build_mollifier(1, M=2, support_radius=0.5, level=10)

    def _moment(self, kernel: GridFunction, order: int) -> float:
        z = kernel.axis_points()
        return float(np.sum(z ** order * kernel.values) * kernel.spacing)

    def test_unit_mass(self):
        assert self._moment(self.mol.phi0, 0) == pytest.approx(1.0, abs=1e-10)

    def test_moments_vanish_up_to_m(self):
        for order in (1, 2):
            assert abs(self._moment(self.mol.phi0, order)) <= 1e-8

    def test_difference_kernel_has_no_mass(self):
        assert abs(self._moment(self.mol.phi, 0)) <= 1e-8
        assert self.mol.L_phi >= 2

    @pytest.mark.parametrize("dim, level", [(1, 10), (2, 6)])
    def test_third_order_moments(self, dim, level):
        mol = build_mollifier(dim, M=3, support_radius=0.5, level=level)
        assert mol.L_phi >= 3
        if dim == 1:
            for order in (1, 2, 3):
                assert abs(self._moment(mol.phi0, order)) <= 1e-8
                assert abs(self._moment(mol.phi, order)) <= 1e-8

    def test_two_dimensional_tensor_product(self):
        mol = build_mollifier(2, M=2, support_radius=0.5, level=6)
        assert mol.phi0.integral() == pytest.approx(1.0, abs=1e-8)

    def test_support_too_small(self):
        with pytest.raises(MollifierError):
            build_mollifier(1, M=4, support_radius=0.01, level=6)

    def test_negative_order(self):
        with pytest.raises(MollifierError):
            build_mollifier(1, M=-1)

    def test_save_and_load(self, tmp_path):
        sidecar = save_mollifier(self.mol, tmp_path / "phi0.csv")
        assert sidecar.exists()
        loaded = load_mollifier(tmp_path / "phi0.csv")
        assert loaded.L_phi == self.mol.L_phi
        assert np.allclose(loaded.phi.values, self.mol.phi.values)


class TestConvolutionNorm:
    """Layers phi_k * f and the weighted l_q(L_p) sum."""

    def setup_method(self):
        self.level = 10
        self.mol = build_mollifier(1, M=2, support_radius=0.5, level=self.level)
        self.params = NormParams(p=2.0, q=2.0, K=3)
        self.t = make_weights("two_ks", s=0.5, level=self.level, K=3)

    def test_layers_annihilate_low_degree_polynomials(self):
        f = GridFunction.from_function(lambda x: 1.0 + x - x ** 2, 1, 2.0, self.level)
        cf = conv_field(f, self.mol, 3)
        interior = np.abs(f.axis_points()) <= 1.0
        for layer in cf.layers[1:]:
            assert np.max(np.abs(layer.values[interior])) <= 1e-5

    @pytest.mark.parametrize("M", [2, 3])
    def test_annihilation_error_falls_under_refinement(self, M):
        errors = []
        for level in (8, 9, 10):
            mol = build_mollifier(1, M=M, support_radius=0.5, level=level)
            f = GridFunction.from_function(lambda x: 1.0 + x - x ** 2, 1, 2.0, level)
            interior = np.abs(f.axis_points()) <= 1.0
            cf = conv_field(f, mol, 3)
            errors.append(max(float(np.max(np.abs(layer.values[interior])))
                              for layer in cf.layers[1:]))
        assert errors[-1] <= 1e-5
        for coarse, fine in zip(errors, errors[1:]):
            assert fine <= coarse / 4.0

    def test_zero_function(self):
        f = GridFunction.zeros(1, 2.0, self.level)
        assert conv_norm(f, self.t, self.mol, self.params).value == 0.0

    def test_homogeneity(self, bump_factory):
        f = bump_factory(level=self.level)
        one = conv_norm(f, self.t, self.mol, self.params).value
        three = conv_norm(f.with_values(3.0 * f.values), self.t, self.mol, self.params).value
        assert three == pytest.approx(3.0 * one, rel=1e-12)

    def test_mismatched_levels(self, bump_factory):
        with pytest.raises(GridError):
            conv_field(bump_factory(level=8), self.mol, 2)

    def test_reconstruction_improves_with_k(self, bump_factory):
        f = bump_factory(level=self.level)
        coarse = reconstruction_error(f, conv_field(f, self.mol, 2), 1.0)
        fine = reconstruction_error(f, conv_field(f, self.mol, 5), 1.0)
        assert fine < coarse

    def test_block_increments_are_tail_partial_sums(self, bump_factory):
        f = bump_factory(level=self.level)
        cf = conv_field(f, self.mol, 3)
        blocks = block_increments(cf, 1.0)
        assert len(blocks) == 3
        assert blocks[0].shape == (4,)
        tail = cf.layers[2].values + cf.layers[3].values
        cube = np.abs(f.axis_points() - 0.5) < 0.5
        expected = np.sum(np.abs(tail[cube])) * f.cell_volume
        assert blocks[1][2] == pytest.approx(expected, rel=1e-12)
        last = np.sum(np.abs(cf.layers[3].values[cube])) * f.cell_volume
        assert blocks[2][2] == pytest.approx(last, rel=1e-12)

    def test_block_increments_stop_early(self, bump_factory):
        cf = conv_field(bump_factory(level=self.level), self.mol, 4)
        assert len(block_increments(cf, 2.0, stop=3)) == 3
        assert block_increments(cf, 2.0, start=5) == []

    def test_block_increments_of_zero(self):
        cf = conv_field(GridFunction.zeros(1, 2.0, self.level), self.mol, 3)
        assert all(np.all(block == 0.0) for block in block_increments(cf, 1.0))

    def test_two_mollifiers_give_comparable_norms(self, bump_factory):
        other = build_mollifier(1, M=4, support_radius=0.5, level=self.level)
        corpus = [bump_factory(level=self.level, center=c, radius=0.4) for c in (-0.2, 0.0, 0.3)]
        forward, backward = verify_mollifier_independence(corpus, self.mol, other, self.t,
                                                          self.params)
        assert all(math.isfinite(r) and r > 0 for r in forward.ratios)
        assert forward.high == pytest.approx(1.0 / backward.low)

    def test_bar_invariance_for_constant_weights(self, bump_factory):
        summary = verify_bar_invariance([bump_factory(level=self.level)], self.mol, self.t,
                                        self.params)
        assert summary.ratios[0] == pytest.approx(1.0)


class TestMaximalFunctions:
    def setup_method(self):
        self.level = 9
        self.mol = build_mollifier(1, M=2, support_radius=0.5, level=self.level)

    def test_maximal_field_dominates_layer_maxima(self, bump_factory):
        cf = conv_field(bump_factory(level=self.level), self.mol, 3)
        field = maximal_field(cf, A=2.0)
        assert len(field.values) == 4
        assert field.values[3].max() == pytest.approx(np.abs(cf.layers[3].values).max())

    @pytest.mark.parametrize("B", [-1.0, 0.5, 2.0])
    def test_geometric_layers_peak_at_the_own_level(self, B):
        """Layers 2^{-kB} with B > -A give M_A(m, j, c) = 2^{-jB}."""
        grid = GridFunction.zeros(1, 2.0, 7)
        layers = tuple(grid.with_values(np.full(grid.shape, 2.0 ** (-k * B))) for k in range(5))
        field = maximal_field(ConvField(layers, self.mol), A=2.0)
        for j, values in enumerate(field.values):
            assert np.allclose(values, 2.0 ** (-j * B), rtol=1e-12)
            assert np.all(field.argmax_k[j] == j)

    def test_zero_field(self):
        cf = conv_field(GridFunction.zeros(1, 2.0, self.level), self.mol, 2)
        assert all(np.all(values == 0.0) for values in maximal_field(cf, A=2.0).values)

    def test_larger_cubes_never_decrease_the_sup(self, bump_factory):
        cf = conv_field(bump_factory(level=self.level), self.mol, 3)
        previous = maximal_field(cf, A=2.0, c=1.0)
        for c in (1.5, 2.0, 3.0):
            wider = maximal_field(cf, A=2.0, c=c)
            for narrow, wide in zip(previous.values, wider.values):
                assert np.all(wide >= narrow)
            previous = wider

    def test_maximal_field_needs_positive_a(self, bump_factory):
        cf = conv_field(bump_factory(level=self.level), self.mol, 1)
        with pytest.raises(ExponentError):
            maximal_field(cf, A=0.0)

    def test_maximal_bound_is_finite(self, bump_factory):
        constant = verify_maximal_bound(bump_factory(level=self.level), self.mol, 1.0, K=4)
        assert 0 < constant < math.inf

    def test_maximal_bound_for_zero(self):
        f = GridFunction.zeros(1, 2.0, self.level)
        assert verify_maximal_bound(f, self.mol, 0.5, K=3) == 0.0

    def test_weighted_maximal_ratio(self, bump_factory):
        t = make_weights("two_ks", s=0.5, level=self.level, K=3)
        ratio = verify_weighted_maximal(bump_factory(level=self.level), t, self.mol, A=2.0,
                                        c=1.0, mu=1.0, params=NormParams(K=3))
        assert 0 < ratio < math.inf


@pytest.mark.slow
class TestMaximalBoundsUnderRefinement:
    """Fitted constants are finite and move by less than 20% from J to J + 1."""

    @staticmethod
    def _at_levels(compute):
        values = []
        for level in (9, 10):
            mol = build_mollifier(1, M=2, support_radius=0.5, level=level)
            f = GridFunction.from_function(smooth_bump(), 1, 2.0, level)
            values.append(compute(f, mol, level))
        return values

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("A", [2.0, 4.0])
    def test_maximal_bound(self, r, A):
        coarse, fine = self._at_levels(lambda f, mol, level: verify_maximal_bound(f, mol, r,
                                                                                 A=A, K=4))
        assert 0 < coarse < math.inf
        assert abs(fine / coarse - 1.0) < 0.2

    @pytest.mark.parametrize("kind, beta", [("two_ks", 0.0), ("power_times_2ks", 0.25)])
    def test_weighted_maximal(self, kind, beta):
        def ratio(f, mol, level):
            t = make_weights(kind, s=0.5, beta=beta, level=level, K=3)
            return verify_weighted_maximal(f, t, mol, A=2.0, c=1.0, mu=1.0,
                                           params=NormParams(K=3))

        coarse, fine = self._at_levels(ratio)
        assert 0 < coarse < math.inf
        assert abs(fine / coarse - 1.0) < 0.2


class TestGeometricRate:
    def test_exact_halving(self):
        assert geometric_rate([1.0, 0.5, 0.25, 0.125]) == pytest.approx(0.5)

    def test_too_few_points(self):
        assert math.isnan(geometric_rate([1.0]))
