import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampedns.errors import GridMismatchError
from dampedns.spectral import (
    CONVENTION,
    GridSpec,
    MultiplierKind,
    SpectralVectorField,
    apply_multiplier,
    dealias,
    forward_transform,
    fractional_symbol,
    gradient_tensor,
    hermitian_symmetrize,
    inner_product,
    inverse_transform,
    leray_project,
    multiplier_symbol,
    physical_l2_norm,
    random_lowpass,
    sobolev_norm,
    sobolev_norm_sq,
)


def _sample(grid, fn):
    x = np.arange(grid.n) * grid.dx
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return np.stack(fn(X, Y, Z))


class TestGridSpec:
    def test_rejects_odd_and_small(self):
        with pytest.raises(ValueError):
            GridSpec(1.0, 9)
        with pytest.raises(ValueError):
            GridSpec(1.0, 6)
        with pytest.raises(ValueError):
            GridSpec(-1.0, 8)

    def test_lattice(self):
        g = GridSpec(4.0, 8)
        assert g.dk == pytest.approx(math.pi / 2)
        m = g.mode_index
        assert m.min() == -4 and m.max() == 3
        assert g.k.shape == (3, 8, 8, 8)
        assert g.cell_volume == pytest.approx((math.pi / 2) ** 3)
        assert CONVENTION == "unitary-Plancherel"

    def test_dealias_mask_two_thirds(self):
        g = GridSpec(2 * math.pi, 12)
        m = g.mode_index
        kept = np.abs(m) <= 4
        expected = kept[:, None, None] & kept[None, :, None] & kept[None, None, :]
        np.testing.assert_array_equal(g.dealias_mask, expected)

    def test_nyquist_derivative_zeroed(self):
        g = GridSpec(2 * math.pi, 8)
        assert np.all(g.k_deriv[0][g.mode_index == -4] == 0)


class TestTransforms:
    def test_plancherel_single_mode(self, grid8):
        # u = (0, sin(x), 0): ||u||^2 = (2 pi)^3 / 2
        u = forward_transform(_sample(grid8, lambda X, Y, Z: (0 * X, np.sin(X), 0 * X)), grid8)
        assert sobolev_norm_sq(u, 0) == pytest.approx(4 * math.pi**3, rel=1e-13)

    def test_round_trip(self, field16):
        back = forward_transform(inverse_transform(field16), field16.grid)
        np.testing.assert_allclose(back.coeffs, field16.coeffs, atol=1e-14)

    def test_physical_and_spectral_norms_agree(self, field16):
        phys = inverse_transform(field16)
        assert physical_l2_norm(phys, field16.grid) == pytest.approx(sobolev_norm(field16, 0), rel=1e-12)

    def test_inner_product_matches_quadrature(self, grid16):
        a = random_lowpass(grid16, 1, 1.0, 3.0)
        b = random_lowpass(grid16, 2, 2.0, 3.0)
        quad = np.sum(inverse_transform(a) * inverse_transform(b)) * grid16.dx**3
        assert inner_product(a, b) == pytest.approx(quad, rel=1e-11)

    def test_h1_norm_of_mode(self, grid8):
        u = forward_transform(_sample(grid8, lambda X, Y, Z: (0 * X, np.sin(2 * X), 0 * X)), grid8)
        assert sobolev_norm_sq(u, 1) == pytest.approx(4 * sobolev_norm_sq(u, 0), rel=1e-12)

    def test_mean_pinned_to_zero(self, grid8):
        u = forward_transform(np.ones((3,) + grid8.shape), grid8)
        assert np.all(u.coeffs == 0)

    def test_wrong_shape(self, grid8):
        with pytest.raises(GridMismatchError):
            SpectralVectorField(grid8, np.zeros((3, 4, 4, 4), dtype=complex))
        with pytest.raises(GridMismatchError):
            forward_transform(np.zeros((3, 4, 4, 4)), grid8)

    def test_grid_mismatch_in_arithmetic(self, grid8, grid16):
        with pytest.raises(GridMismatchError):
            SpectralVectorField.zeros(grid8) + SpectralVectorField.zeros(grid16)

    def test_gradient_of_shear(self, grid8):
        u = forward_transform(_sample(grid8, lambda X, Y, Z: (np.sin(Y), 0 * X, 0 * X)), grid8)
        grad = gradient_tensor(u)
        x = np.arange(8) * grid8.dx
        expected = np.cos(x)[None, :, None] * np.ones((8, 8, 8))
        np.testing.assert_allclose(grad[0, 1], expected, atol=1e-13)


class TestLeray:
    def test_removes_gradient(self, grid8):
        grad_phi = _sample(grid8, lambda X, Y, Z: (np.cos(X + Y), np.cos(X + Y), 0 * X))
        v = leray_project(forward_transform(grad_phi, grid8))
        assert sobolev_norm(v, 0) < 1e-13

    def test_keeps_solenoidal(self, grid8):
        u = forward_transform(_sample(grid8, lambda X, Y, Z: (np.sin(Z), np.cos(X), 0 * X)), grid8)
        np.testing.assert_allclose(leray_project(u).coeffs, u.coeffs, atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_idempotent_and_divergence_free(self, seed):
        g = GridSpec(5.0, 8)
        rng = np.random.default_rng(seed)
        raw = forward_transform(rng.standard_normal((3,) + g.shape), g)
        once = leray_project(raw)
        twice = leray_project(once)
        np.testing.assert_allclose(twice.coeffs, once.coeffs, atol=1e-13)
        assert once.divergence_defect() < 1e-13
        assert sobolev_norm(once, 0) <= sobolev_norm(raw, 0) * (1 + 1e-14)


class TestMultipliers:
    def test_fractional_alpha_two_is_bitwise_laplacian(self, grid16):
        assert np.array_equal(fractional_symbol(grid16, 2.0), grid16.k2)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.5, 3.0])
    def test_fractional_symbol_values(self, grid16, alpha):
        np.testing.assert_allclose(fractional_symbol(grid16, alpha), grid16.kmag**alpha, rtol=1e-14)

    def test_mollifier_zero_delta_identity(self, field16):
        out = apply_multiplier(MultiplierKind.mollifier(0.0), field16)
        np.testing.assert_array_equal(out.coeffs, field16.coeffs)

    def test_mollifier_symbol(self, grid16):
        sym = multiplier_symbol(MultiplierKind.mollifier(0.3), grid16)
        np.testing.assert_allclose(sym, np.exp(-0.09 * grid16.k2), rtol=1e-15)

    def test_heat_factor(self, grid16):
        sym = multiplier_symbol(MultiplierKind.heat_factor(0.7, 0.01), grid16)
        np.testing.assert_allclose(sym, np.exp(-0.007 * grid16.k2), rtol=1e-15)

    def test_dealias_kills_high_modes(self, grid16):
        rng = np.random.default_rng(0)
        u = forward_transform(rng.standard_normal((3,) + grid16.shape), grid16)
        d = dealias(u)
        assert np.all(d.coeffs[:, ~grid16.dealias_mask] == 0)

    def test_invalid_kinds(self):
        with pytest.raises(ValueError):
            MultiplierKind.fractional_laplacian(-1.0)
        with pytest.raises(ValueError):
            MultiplierKind.mollifier(-0.1)


class TestRandomFields:
    def test_properties(self, grid16):
        u = random_lowpass(grid16, seed=5, energy=2.5, cutoff=3.0)
        assert sobolev_norm_sq(u, 0) == pytest.approx(2.5, rel=1e-12)
        assert u.hermitian_defect() < 1e-15
        assert u.divergence_defect() < 1e-14
        assert np.all(u.coeffs[:, grid16.kmag > 3.0] == 0)

    def test_seeded(self, grid16):
        a = random_lowpass(grid16, 9, 1.0, 3.0)
        b = random_lowpass(grid16, 9, 1.0, 3.0)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_hermitian_symmetrize(self, grid8):
        rng = np.random.default_rng(1)
        c = rng.standard_normal((3,) + grid8.shape) + 1j * rng.standard_normal((3,) + grid8.shape)
        sym = SpectralVectorField(grid8, hermitian_symmetrize(c, grid8))
        assert sym.hermitian_defect() < 1e-15
        physical = np.fft.ifftn(sym.coeffs, axes=(1, 2, 3))
        assert np.max(np.abs(physical.imag)) < 1e-15 * np.max(np.abs(physical.real))
