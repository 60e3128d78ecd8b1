"""Tests for the torus field core: transforms, multipliers, products, IO."""

import numpy as np
import pytest

from kslab import (
    Composite,
    DampedHeat,
    FractionalLaplacian,
    GradComponent,
    Grid2D,
    Heat,
    Laplacian,
    ScalarField,
    divergence,
    from_spectral,
    gradient,
    load_field,
    make_grid,
    multiplier_apply,
    pointwise_product,
    save_field,
    to_spectral,
)
from kslab.fields import read_snapshot, write_snapshot


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, rng.standard_normal((grid.n, grid.n)))


class TestGrid2D:
    def test_basic_spacing(self):
        g = make_grid(16, 16.0)
        assert g.h == 1.0
        # wavenumbers run -pi .. pi - step in steps of pi/8
        assert np.isclose(np.max(g.k1), 2 * np.pi / 16.0 * 7)
        assert np.isclose(np.min(g.k1), -np.pi)

    def test_spacing_128(self):
        g = make_grid(128, 32.0)
        assert g.h == 0.25

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            make_grid(100, 32.0)

    def test_rejects_small_or_bad_l(self):
        with pytest.raises(ValueError):
            make_grid(8, 16.0)
        with pytest.raises(ValueError):
            make_grid(64, 0.0)

    def test_max_wavenumber(self):
        g = make_grid(64, 16.0)
        assert np.isclose(np.max(np.abs(g.k1)), np.pi * g.n / g.l)

    def test_coords_cover_torus(self):
        g = make_grid(16, 8.0)
        x1, x2 = g.coords()
        assert x1[0, 0] == -4.0
        assert x1[-1, 0] == 4.0 - g.h
        assert x2.shape == (1, 16)


class TestScalarField:
    def test_rejects_nonfinite(self):
        g = make_grid(16, 8.0)
        values = np.zeros((16, 16))
        values[3, 4] = np.nan
        with pytest.raises(ValueError, match="finite"):
            ScalarField(g, values)

    def test_rejects_shape_mismatch(self):
        g = make_grid(16, 8.0)
        with pytest.raises(ValueError, match="shape"):
            ScalarField(g, np.zeros((16, 8)))

    def test_arithmetic(self):
        g = make_grid(16, 8.0)
        f = random_field(g, 1)
        h = random_field(g, 2)
        np.testing.assert_allclose((f + h).values, f.values + h.values)
        np.testing.assert_allclose((2.0 * f - h).values, 2 * f.values - h.values)

    def test_integral_is_mean_times_area(self):
        g = make_grid(16, 4.0)
        f = ScalarField(g, np.full((16, 16), 3.0))
        assert np.isclose(f.integral(), 3.0 * 16.0)


class TestTransforms:
    def test_constant_field_is_dc_mode(self):
        g = make_grid(16, 8.0)
        F = to_spectral(ScalarField(g, np.ones((16, 16))))
        expected = np.zeros((16, 16), dtype=complex)
        expected[0, 0] = 16 * 16
        np.testing.assert_allclose(F.coeffs, expected, atol=1e-12)

    def test_single_cosine_two_conjugate_modes(self):
        g = make_grid(16, 16.0)
        x1, _ = g.coords()
        f = ScalarField(g, np.cos(2 * np.pi * x1 / g.l) * np.ones((1, 16)))
        F = to_spectral(f)
        mags = np.abs(F.coeffs)
        nonzero = np.argwhere(mags > 1e-9)
        assert {tuple(i) for i in nonzero} == {(1, 0), (15, 0)}
        assert np.isclose(F.coeffs[1, 0], F.coeffs[15, 0].conjugate())

    def test_roundtrip_matches_direct_summation(self):
        # independent oracle: O(n^4) discrete Fourier sum at n = 16
        g = make_grid(16, 8.0)
        f = random_field(g, 3)
        F = to_spectral(f)
        n = g.n
        j = np.arange(n)
        direct = np.empty((n, n), dtype=complex)
        for k1 in range(n):
            for k2 in range(n):
                phase = np.exp(-2j * np.pi * (k1 * j[:, None] + k2 * j[None, :]) / n)
                direct[k1, k2] = np.sum(f.values * phase)
        np.testing.assert_allclose(F.coeffs, direct, atol=1e-9)
        back = from_spectral(F)
        rel = np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values))
        assert rel < 1e-12

    def test_parseval(self):
        g = make_grid(32, 8.0)
        f = random_field(g, 4)
        F = to_spectral(f)
        l2_sq = np.sum(f.values**2) * g.cell_area
        spectral = g.l**2 / g.n**4 * np.sum(np.abs(F.coeffs) ** 2)
        assert abs(l2_sq - spectral) / l2_sq < 1e-10

    def test_hermitian_symmetry_detects_real_fields(self):
        g = make_grid(16, 8.0)
        F = to_spectral(random_field(g, 5))
        assert F.is_hermitian()
        broken = F.coeffs.copy()
        broken[2, 3] += 1.0  # no conjugate partner update
        from kslab import SpectralField

        assert not SpectralField(g, broken).is_hermitian()


class TestMultipliers:
    def test_heat_zero_time_is_identity(self):
        g = make_grid(32, 8.0)
        f = random_field(g, 6)
        out = multiplier_apply(Heat(0.0), f)
        np.testing.assert_allclose(out.values, f.values, atol=1e-13)

    def test_heat_on_eigenfunction(self):
        g = make_grid(32, 16.0)
        x1, x2 = g.coords()
        k = 2 * np.pi * np.array([2, 1]) / g.l
        f = ScalarField(g, np.cos(k[0] * x1 + k[1] * x2))
        t = 0.7
        out = multiplier_apply(Heat(t), f)
        np.testing.assert_allclose(out.values, np.exp(-t * (k @ k)) * f.values, atol=1e-13)

    def test_fractional_laplacian_symbol(self):
        g = make_grid(32, 16.0)
        x1, _ = g.coords()
        k = 2 * np.pi * 3 / g.l
        f = ScalarField(g, np.cos(k * x1) * np.ones((1, 32)))
        out = multiplier_apply(FractionalLaplacian(1.0), f)
        np.testing.assert_allclose(out.values, k * f.values, atol=1e-12)

    def test_fractional_laplacian_rejects_nonpositive_power(self):
        with pytest.raises(ValueError, match="positive"):
            FractionalLaplacian(0.0)
        with pytest.raises(ValueError, match="positive"):
            FractionalLaplacian(-1.0)

    def test_nonfinite_multiplier_rejected(self):
        g = make_grid(16, 8.0)
        f = random_field(g, 7)
        with np.errstate(over="ignore"), pytest.raises(ValueError, match="NaN or infinity"):
            multiplier_apply(Heat(-1e6), f)  # overflows to inf off the zero mode

    def test_semigroup_property(self):
        g = make_grid(32, 8.0)
        f = random_field(g, 8)
        one = multiplier_apply(Heat(0.4), multiplier_apply(Heat(0.6), f))
        two = multiplier_apply(Heat(1.0), f)
        assert np.max(np.abs(one.values - two.values)) < 1e-12

    def test_composite_matches_sequential(self):
        g = make_grid(32, 8.0)
        f = random_field(g, 9)
        comp = multiplier_apply(Composite((Heat(0.3), Laplacian())), f)
        seq = multiplier_apply(Laplacian(), multiplier_apply(Heat(0.3), f))
        np.testing.assert_allclose(comp.values, seq.values, atol=1e-11)

    def test_damped_heat_mode_decay(self):
        g = make_grid(32, 16.0)
        x1, _ = g.coords()
        k = 2 * np.pi * 2 / g.l
        f = ScalarField(g, np.cos(k * x1) * np.ones((1, 32)))
        t = 0.9
        out = multiplier_apply(DampedHeat(t), f)
        np.testing.assert_allclose(out.values, np.exp(-t * (1 + k * k)) * f.values, atol=1e-13)


class TestProducts:
    def test_product_with_one(self):
        g = make_grid(32, 8.0)
        f = random_field(g, 10)
        smooth = multiplier_apply(Heat(0.05), f)  # stay inside the dealias band
        out = pointwise_product(smooth, ScalarField(g, np.ones((32, 32))))
        dealiased = multiplier_apply(Heat(0.0), smooth)  # identity
        mask = g.dealias_mask
        from kslab.fields import fft2, ifft2

        expected = ifft2(mask * fft2(smooth.values)).real
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_cosine_square_identity(self):
        g = make_grid(32, 16.0)
        x1, _ = g.coords()
        k = 2 * np.pi * 3 / g.l  # 2k = 6 below the cutoff 10
        f = ScalarField(g, np.cos(k * x1) * np.ones((1, 32)))
        out = pointwise_product(f, f)
        expected = 0.5 + 0.5 * np.cos(2 * k * x1) * np.ones((1, 32))
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_against_padded_product_oracle(self):
        # oracle: zero-pad spectra to 2n, multiply exactly, compare retained modes
        g = make_grid(32, 8.0)
        f = random_field(g, 11)
        h = random_field(g, 12)
        out = pointwise_product(f, h)

        from kslab.fields import fft2, ifft2

        n = g.n
        big = 2 * n

        def pad(values):
            c = np.fft.fft2(values)
            cp = np.zeros((big, big), dtype=complex)
            idx = np.fft.fftfreq(n) * n
            for a in range(n):
                for b in range(n):
                    cp[int(idx[a]) % big, int(idx[b]) % big] = c[a, b]
            return np.fft.ifft2(cp).real * (big * big) / (n * n)

        mask = g.dealias_mask
        fd = ifft2(mask * fft2(f.values)).real
        hd = ifft2(mask * fft2(h.values)).real
        exact = np.fft.fft2(pad(fd) * pad(hd))
        # gather retained modes of the exact product on the fine grid
        exact_coarse = np.zeros((n, n), dtype=complex)
        idx = np.fft.fftfreq(n) * n
        for a in range(n):
            for b in range(n):
                exact_coarse[a, b] = exact[int(idx[a]) % big, int(idx[b]) % big]
        exact_coarse *= (n * n) / (big * big)
        got = fft2(out.values)
        keep = g.dealias_mask
        scale = np.max(np.abs(exact_coarse[keep]))
        assert np.max(np.abs((got - exact_coarse)[keep])) / scale < 1e-10

    def test_symmetry_and_bilinearity(self):
        g = make_grid(32, 8.0)
        f, h, w = (random_field(g, s) for s in (13, 14, 15))
        ab = pointwise_product(f, h)
        ba = pointwise_product(h, f)
        np.testing.assert_allclose(ab.values, ba.values, atol=1e-12)
        lin = pointwise_product(f + 2.0 * w, h)
        split = pointwise_product(f, h) + 2.0 * pointwise_product(w, h)
        np.testing.assert_allclose(lin.values, split.values, atol=1e-11)


class TestDerivatives:
    def test_gradient_of_constant(self):
        g = make_grid(16, 8.0)
        g1, g2 = gradient(ScalarField(g, np.ones((16, 16))))
        assert np.max(np.abs(g1.values)) < 1e-14
        assert np.max(np.abs(g2.values)) < 1e-14

    def test_gradient_single_mode(self):
        g = make_grid(64, 16.0)
        x1, _ = g.coords()
        k = 2 * np.pi / g.l
        f = ScalarField(g, np.sin(k * x1) * np.ones((1, 64)))
        g1, g2 = gradient(f)
        np.testing.assert_allclose(g1.values, k * np.cos(k * x1) * np.ones((1, 64)), atol=1e-12)
        assert np.max(np.abs(g2.values)) < 1e-13

    def test_divergence_integral_vanishes(self):
        g = make_grid(32, 8.0)
        f1, f2 = random_field(g, 16), random_field(g, 17)
        div = divergence(f1, f2)
        assert abs(div.integral()) < 1e-12

    def test_div_grad_symbol_equals_laplacian(self):
        g = make_grid(32, 8.0)
        grad_sq = (1j * g.kx) ** 2 + (1j * g.ky) ** 2
        np.testing.assert_array_equal(grad_sq.real, Laplacian().symbol(g))

    def test_div_grad_matches_laplacian_on_band_limited_field(self):
        from kslab import random_band_limited_field

        g = make_grid(32, 8.0)
        f = random_band_limited_field(g, seed=18, max_mode=8)
        via_parts = divergence(*gradient(f))
        direct = multiplier_apply(Laplacian(), f)
        scale = np.max(np.abs(direct.values))
        assert np.max(np.abs(via_parts.values - direct.values)) / scale < 1e-12


class TestSnapshotIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        g = make_grid(32, 8.0)
        f = random_field(g, 19)
        path = tmp_path / "field.ksf1"
        save_field(path, f, t=0.625)
        back, t = load_field(path)
        assert t == 0.625
        assert back.grid == g
        assert np.array_equal(back.values, f.values)  # bit exact

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ksf1"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_field(path)

    def test_truncated_payload_rejected(self, tmp_path):
        import io

        g = make_grid(16, 8.0)
        f = random_field(g, 20)
        buf = io.BytesIO()
        write_snapshot(buf, f, 1.0)
        raw = buf.getvalue()[:-8]
        with pytest.raises(ValueError, match="truncated"):
            read_snapshot(io.BytesIO(raw))
