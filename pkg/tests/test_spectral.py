"""Tests for the periodic grid, transforms and kernel operations."""

import numpy as np
import pytest

from vll.spectral import (
    Mollifier,
    ScalarField,
    TorusGrid,
    VectorField,
    ball_convolve,
    biot_savart,
    curl,
    dealias,
    dealias_mask,
    disk_average_symbol,
    energy,
    h1_seminorm,
    l1,
    l2,
    laplacian,
    make_grid,
    mollify,
    perp_grad,
    read_snapshot,
    resample,
    stream_function,
    write_snapshot,
)


def random_vorticity(n, seed, kmax=None):
    """Random mean-zero vorticity; band-limited to ``|k| <= kmax`` if given."""
    rng = np.random.default_rng(seed)
    g = make_grid(n)
    w = rng.standard_normal((n, n))
    spec = g.fft(w)
    spec[0, 0] = 0.0
    if kmax is not None:
        spec[g.kmag > kmax] = 0.0
    return ScalarField(g, g.ifft(spec))


def divergence(u):
    g = u.grid
    k1, k2 = g.deriv_wavevectors
    s = u.spectrum
    return g.ifft(1j * k1 * s[0] + 1j * k2 * s[1])


class TestGrid:
    def test_spacing_n4(self):
        assert make_grid(4).spacing == pytest.approx(np.pi / 2, rel=1e-15)

    @pytest.mark.parametrize("n", [3, 2, 0, -4, 7])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            make_grid(n)

    def test_rejects_non_integer(self):
        with pytest.raises(TypeError):
            TorusGrid(8.0)

    def test_sample_count(self):
        g = make_grid(128)
        x1, x2 = g.mesh()
        assert x1.size == 16384

    def test_wavenumber_layout(self):
        g = make_grid(8)
        np.testing.assert_array_equal(g.k, [0, 1, 2, 3, -4, -3, -2, -1])
        np.testing.assert_array_equal(g.kd, [0, 1, 2, 3, 0, -3, -2, -1])

    def test_nodes(self):
        g = make_grid(16)
        assert g.x[0] == 0.0
        assert g.x[-1] == pytest.approx(2 * np.pi - g.spacing)


class TestFields:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ScalarField(make_grid(8), np.zeros((8, 4)))
        with pytest.raises(ValueError):
            VectorField(make_grid(8), np.zeros((8, 8)))

    def test_non_finite(self):
        v = np.zeros((8, 8))
        v[0, 0] = np.nan
        with pytest.raises(ValueError):
            ScalarField(make_grid(8), v)

    def test_mean_zero_flag(self):
        with pytest.raises(ValueError):
            ScalarField(make_grid(8), np.ones((8, 8)), mean_zero=True)


class TestBiotSavart:
    def test_single_mode(self):
        g = make_grid(32)
        x1, x2 = g.mesh()
        u = biot_savart(ScalarField(g, -np.cos(x2)))
        np.testing.assert_allclose(u.values[0], np.sin(x2), atol=1e-14)
        np.testing.assert_allclose(u.values[1], 0.0, atol=1e-14)

    def test_zero(self):
        g = make_grid(16)
        u = biot_savart(ScalarField(g, np.zeros((16, 16))))
        assert np.all(u.values == 0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_round_trip(self, seed):
        w = random_vorticity(64, seed, kmax=31)
        u = biot_savart(w)
        back = curl(u)
        err = l2(back - w) / l2(w)
        assert err <= 1e-12

    def test_divergence_free_and_mean_zero(self):
        u = biot_savart(random_vorticity(64, 5))
        assert np.max(np.abs(divergence(u))) <= 1e-12 * np.max(np.abs(u.values))
        assert np.all(np.abs(u.values.mean(axis=(1, 2))) <= 1e-14)

    def test_rejects_nonzero_mean(self):
        g = make_grid(16)
        with pytest.raises(ValueError, match="mean-zero"):
            biot_savart(ScalarField(g, np.ones((16, 16))))

    def test_stream_function(self):
        w = random_vorticity(32, 1, kmax=15)
        psi = stream_function(w)
        np.testing.assert_allclose(laplacian(psi).values, w.values, atol=1e-11)
        np.testing.assert_allclose(perp_grad(psi).values, biot_savart(w).values, atol=1e-12)


class TestNorms:
    def test_shear_closed_forms(self):
        g = make_grid(32)
        x1, x2 = g.mesh()
        u = VectorField(g, np.stack([np.sin(x2), np.zeros_like(x2)]))
        assert energy(u) == pytest.approx(np.pi**2, rel=1e-14)
        assert h1_seminorm(u) ** 2 == pytest.approx(2 * np.pi**2, rel=1e-13)
        assert l1(u) == pytest.approx(4 * 2 * np.pi, rel=1e-2)  # |sin| quadrature

    def test_zero(self):
        g = make_grid(16)
        z = ScalarField(g, np.zeros((16, 16)))
        assert l1(z) == l2(z) == h1_seminorm(z) == 0.0
        assert energy(VectorField(g, np.zeros((2, 16, 16)))) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_vorticity_identity(self, seed):
        # w = Laplace(psi) for random psi: every mode of w carries velocity.
        rng = np.random.default_rng(100 + seed)
        g = make_grid(48)
        w = laplacian(ScalarField(g, rng.standard_normal((48, 48))))
        u = biot_savart(w)
        assert h1_seminorm(u) == pytest.approx(l2(w), rel=1e-12)

    def test_l2_of_trig_polynomial(self):
        g = make_grid(16)
        x1, x2 = g.mesh()
        f = ScalarField(g, np.cos(3 * x1) * np.sin(2 * x2))
        assert l2(f) ** 2 == pytest.approx(np.pi**2, rel=1e-14)


class TestMollify:
    def test_constant_preserved(self):
        g = make_grid(64)
        f = ScalarField(g, np.full((64, 64), 2.5))
        np.testing.assert_allclose(mollify(f, 0.4).values, 2.5, atol=1e-8)

    def test_contraction(self):
        w = random_vorticity(64, 3)
        for alpha in (0.3, 0.6, 1.2):
            assert l2(mollify(w, alpha)) <= l2(w) * (1 + 1e-8)
            assert l1(mollify(w, alpha)) <= l1(w) * (1 + 1e-8)

    def test_vector(self):
        u = biot_savart(random_vorticity(64, 4))
        m = mollify(u, 0.5)
        assert isinstance(m, VectorField)
        assert l2(m) <= l2(u) * (1 + 1e-8)

    def test_first_order_ratio(self):
        g = make_grid(512)
        x1, x2 = g.mesh()
        f = ScalarField(g, np.sin(x1) * np.cos(2 * x2) + 0.5 * np.cos(3 * x1 + x2))
        ratios = [l2(mollify(f, a) - f) / (a * h1_seminorm(f)) for a in (0.1, 0.05, 0.025)]
        assert max(ratios) <= 1.0
        # Second-order even kernel: the ratio itself decays linearly in alpha.
        assert ratios[0] > ratios[1] > ratios[2]

    def test_under_resolved(self):
        g = make_grid(32)
        f = ScalarField(g, np.zeros((32, 32)))
        with pytest.raises(ValueError, match="under-resolved kernel"):
            mollify(f, 2 * g.spacing)

    def test_mollifier_weights(self):
        w = Mollifier(0.5).weights(make_grid(64))
        assert w.sum() == pytest.approx(1.0, rel=1e-14)
        with pytest.raises(ValueError):
            Mollifier(0.0)


class TestBallConvolve:
    def test_unit_density(self):
        g = make_grid(128)
        out = ball_convolve(ScalarField(g, np.ones((128, 128))), 0.5)
        rel = np.max(np.abs(out.values - np.pi * 0.25)) / (np.pi * 0.25)
        assert rel <= 2 * g.spacing / 0.5

    def test_zero(self):
        g = make_grid(32)
        out = ball_convolve(ScalarField(g, np.zeros((32, 32))), 0.5)
        assert np.all(out.values == 0.0)

    def test_narrow_bump_mass(self):
        g = make_grid(256)
        r = 0.3
        w = Mollifier(r / 5).weights(g) / g.cell_area  # unit mass at the origin
        out = ball_convolve(ScalarField(g, w), r)
        assert out.values[0, 0] >= 0.99

    def test_radius_limits(self):
        g = make_grid(32)
        f = ScalarField(g, np.ones((32, 32)))
        with pytest.raises(ValueError):
            ball_convolve(f, 3.2)
        with pytest.raises(ValueError):
            ball_convolve(f, 0.5 * g.spacing)

    def test_disk_symbol(self):
        assert disk_average_symbol(np.array([0.0]), 1.0)[0] == 1.0
        # first zero of J1
        assert abs(disk_average_symbol(np.array([3.8317059702075125]), 1.0)[0]) < 1e-12


class TestDealias:
    def _mode(self, n, k1, k2):
        s = np.zeros((n, n), dtype=complex)
        s[k1 % n, k2 % n] = s[-k1 % n, -k2 % n] = 0.5 * n * n
        return s

    def test_low_mode_kept(self):
        s = self._mode(128, 1, 0)
        np.testing.assert_array_equal(dealias(s), s)

    def test_high_mode_removed(self):
        s = self._mode(128, 60, 0)
        assert np.all(dealias(s) == 0)

    def test_white_noise_count(self):
        rng = np.random.default_rng(0)
        s = np.fft.fft2(rng.standard_normal((96, 96)))
        assert np.count_nonzero(dealias(s)) == (2 * 32 + 1) ** 2
        assert dealias_mask(96).sum() == 65**2

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            dealias(np.zeros((4, 6)))


class TestResampleAndSnapshots:
    def test_resample_band_limited_exact(self):
        w = random_vorticity(32, 9, kmax=10)
        up = resample(w, make_grid(64))
        back = resample(up, make_grid(32))
        np.testing.assert_allclose(back.values, w.values, atol=1e-13)
        assert l2(up) == pytest.approx(l2(w), rel=1e-13)

    def test_snapshot_round_trip(self, tmp_path):
        w = random_vorticity(16, 2)
        p = write_snapshot(tmp_path / "a.vll", w, 1e-3, 0.25)
        snap = read_snapshot(p)
        np.testing.assert_array_equal(snap.omega.values, w.values)
        assert (snap.nu, snap.t) == (1e-3, 0.25)

    def test_snapshot_corrupted(self, tmp_path):
        w = random_vorticity(16, 2)
        p = write_snapshot(tmp_path / "a.vll", w, 1e-3, 0.25)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_snapshot(p)
        p.write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(ValueError, match="magic"):
            read_snapshot(p)
