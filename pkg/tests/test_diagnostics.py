"""Tests for inviscid-limit functionals, certificates, pairings and tables."""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import j1

from vll.diagnostics import (
    DiagnosticTable,
    SparseSnapshotWarning,
    _q_density,
    atom_mass,
    dissipation_total,
    fit_drift,
    grad_u_integral,
    higher_order_certificate,
    kolmogorov_equivalence_report,
    lambda_con,
    modulus_of_compactness,
    omega_con,
    omega_hat_field,
    q_con,
    rate_certificate,
    s2_certificate,
    short_time_certificate,
    structure_function,
    tensor_pairing,
    time_integral,
    weak_star_pairing,
)
from vll.dynamics import Trajectory, evolve
from vll.equi import power_beta
from vll.lab import initial_vorticity
from vll.spectral import (
    Mollifier,
    ScalarField,
    VectorField,
    ball_convolve,
    biot_savart,
    disk_area,
    l1,
    l2,
    make_grid,
)


def frozen(omega, nu=1e-2, T=1.0, count=51):
    """Time-independent trajectory holding ``omega`` at ``count`` snapshot times."""
    times = np.linspace(0.0, T, count)
    return Trajectory(omega.grid, nu, times, [omega] * count)


def shear_omega(n, m=1):
    g = make_grid(n)
    x1, x2 = g.mesh()
    return ScalarField(g, -m * np.cos(m * x2))  # u = (sin(m x2), 0)


def tg_omega(n):
    g = make_grid(n)
    x1, x2 = g.mesh()
    return ScalarField(g, -2.0 * np.sin(x1) * np.sin(x2))


@pytest.fixture(scope="module")
def tg_traj():
    return evolve(tg_omega(80), 1e-2, 1.0, 1e-2)


@pytest.fixture(scope="module")
def random_traj():
    g = make_grid(96)
    w0 = initial_vorticity("random_smooth", {"seed": 5, "kmax": 6}, g, 1e-2)
    return evolve(w0, 1e-2, 1.0, 1e-2)


class TestTimeIntegral:
    def test_trapezoid_window(self):
        t = np.linspace(0, 1, 101)
        assert time_integral(t, t, 0.25, 0.75) == pytest.approx(0.25, rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            time_integral(np.linspace(0, 1, 60), np.ones(60), 0.0, 2.0)

    def test_sparse_warning(self):
        with pytest.warns(SparseSnapshotWarning):
            time_integral(np.linspace(0, 1, 5), np.ones(5))


class TestDissipation:
    def test_taylor_green_closed_form(self, tg_traj):
        nu, T = 1e-2, 1.0
        w0sq = l2(tg_traj.snapshots[0]) ** 2
        exact = w0sq * (1 - math.exp(-4 * nu * T)) / 4
        assert dissipation_total(tg_traj) == pytest.approx(exact, rel=1e-5)

    def test_zero(self):
        assert dissipation_total(frozen(ScalarField(make_grid(32), np.zeros((32, 32))))) == 0.0

    @pytest.mark.parametrize("m", [1, 4])
    def test_steady_shear_per_unit_time(self, m):
        tr = frozen(shear_omega(64, m), nu=1.0 / m**2)
        assert dissipation_total(tr) == pytest.approx((2 * np.pi) ** 2 / 2, rel=1e-12)

    def test_window(self, tg_traj):
        full = dissipation_total(tg_traj)
        assert dissipation_total(tg_traj, 0.5) < full


class TestStructureFunction:
    def test_frozen_shear_bessel_and_quadrature(self):
        ell = 0.5
        tr = frozen(shear_omega(64))
        val = structure_function(tr, ell)
        closed = (2 * np.pi) ** 2 * (1 - 2 * j1(ell) / ell)
        assert val == pytest.approx(closed, rel=1e-12)
        quad, _ = integrate.dblquad(lambda y2, y1: 1 - math.cos(y2), -ell, ell,
                                    lambda y1: -math.sqrt(ell**2 - y1**2), lambda y1: math.sqrt(ell**2 - y1**2),
                                    epsabs=1e-13, epsrel=1e-12)
        assert val == pytest.approx((2 * np.pi) ** 2 * quad / (np.pi * ell**2), rel=1e-4)

    def test_grid_method_close(self):
        tr = frozen(shear_omega(128))
        spec = structure_function(tr, 0.5)
        grid = structure_function(tr, 0.5, method="grid")
        assert grid == pytest.approx(spec, rel=0.05)

    def test_zero(self):
        assert structure_function(frozen(ScalarField(make_grid(64), np.zeros((64, 64)))), 0.5) == 0.0

    def test_bounded_by_gradient(self, random_traj):
        for ell in (0.3, 0.6, 1.0):
            s2 = structure_function(random_traj, ell)
            assert s2 <= ell**2 * grad_u_integral(random_traj) * (1 + 1e-3)
            assert s2_certificate(random_traj, ell).passed

    def test_nondecreasing_in_ell(self, random_traj):
        vals = [structure_function(random_traj, ell) for ell in (0.3, 0.5, 0.8, 1.2)]
        assert all(b >= a * (1 - 1e-3) for a, b in zip(vals, vals[1:]))

    def test_under_resolved(self):
        with pytest.raises(ValueError, match="under-resolved"):
            structure_function(frozen(shear_omega(32)), 0.5)


class TestConcentration:
    def test_lambda_self_reference(self, random_traj):
        assert lambda_con(random_traj, 0.5, u_ref=random_traj) == 0.0
        twin = Trajectory(random_traj.grid, random_traj.nu, random_traj.times, list(random_traj.snapshots))
        assert lambda_con(random_traj, 0.5, u_ref=twin) == pytest.approx(0.0, abs=1e-12)

    def test_lambda_frozen_shear(self):
        ell = 0.5
        tr = frozen(shear_omega(256))
        val = lambda_con(tr, ell)
        # sup over centres is attained at x2 = pi/2 (where sin^2 peaks)
        quad, _ = integrate.dblquad(lambda y2, y1: math.sin(math.pi / 2 + y2) ** 2, -ell, ell,
                                    lambda y1: -math.sqrt(ell**2 - y1**2), lambda y1: math.sqrt(ell**2 - y1**2))
        assert val == pytest.approx(math.sqrt(quad), rel=2e-2)

    def test_lambda_vector_reference(self):
        tr = frozen(shear_omega(64))
        u = biot_savart(tr.snapshots[0])
        assert lambda_con(tr, 0.5, u_ref=u) == pytest.approx(0.0, abs=1e-12)
        assert lambda_con(tr, 0.5, u_ref="zero_ref") == lambda_con(tr, 0.5)

    def test_omega_con_zero(self):
        assert omega_con(frozen(ScalarField(make_grid(64), np.zeros((64, 64)))), 0.5) == 0.0

    def test_omega_con_mass_capture(self):
        g = make_grid(256)
        w = ScalarField(g, Mollifier(0.3).weights(g) / g.cell_area)
        assert omega_con(frozen(w), 0.5) == pytest.approx(1.0, abs=1e-3)

    def test_omega_con_cauchy_schwarz(self, random_traj):
        ell = 0.4
        area = disk_area(random_traj.grid, ell)
        rhs = math.sqrt(area) * math.sqrt(random_traj.T * grad_u_integral(random_traj))
        assert omega_con(random_traj, ell) <= rhs

    def test_q_constant_velocity(self):
        g = make_grid(64)
        u = VectorField(g, np.stack([np.full((64, 64), 1.5), np.full((64, 64), -0.5)]))
        assert np.max(_q_density(u, 0.5)) <= 1e-12

    def test_q_below_lambda(self, random_traj):
        ell = 0.5
        for i in (0, len(random_traj) // 2, len(random_traj) - 1):
            u = random_traj.velocity(i)
            q = _q_density(u, ell)
            second = ball_convolve(u.magnitude_sq(), ell).values
            assert np.all(q <= second * (1 + 1e-12) + 1e-14)
        assert q_con(random_traj, ell) <= lambda_con(random_traj, ell) * (1 + 1e-12)

    def test_q_frozen_shear_below_lambda(self):
        tr = frozen(shear_omega(128))
        assert q_con(tr, 0.5) <= lambda_con(tr, 0.5)


class TestOmegaHat:
    def test_zero(self):
        g = make_grid(64)
        assert np.all(omega_hat_field(ScalarField(g, np.zeros((64, 64))), 0.04).values == 0.0)

    def test_constant(self):
        g = make_grid(128)
        nu = 0.09
        c = 2.0
        out = omega_hat_field(ScalarField(g, np.full((128, 128), c)), nu)
        np.testing.assert_allclose(out.values, c * c * disk_area(g, math.sqrt(nu)), rtol=1e-12)
        assert disk_area(g, math.sqrt(nu)) == pytest.approx(np.pi * nu, rel=2 * g.spacing / math.sqrt(nu))

    def test_holder(self, random_traj):
        w = random_traj.snapshots[-1]
        nu = 0.09
        total = w.grid.integrate(omega_hat_field(w, nu).values)
        sup = float(np.max(ball_convolve(abs(w), math.sqrt(nu)).values))
        assert total <= l1(w) * sup * (1 + 1e-12)


class TestModulus:
    def test_single_smooth_field(self):
        g = make_grid(256)
        u = biot_savart(tg_omega(256))
        phi = modulus_of_compactness([u], [0.1, 0.2, 0.4])
        grad = math.sqrt(2) * l2(u)
        for eps, val in phi.items():
            assert val <= grad * eps

    def test_oscillating_family_not_compact(self):
        g = make_grid(256)
        x1, x2 = g.mesh()
        fam = [VectorField(g, np.stack([np.sin(k * x2), np.zeros_like(x2)])) for k in (20, 40)]
        phi = modulus_of_compactness(fam, [0.3])
        assert phi[0.3] >= 0.8 * l2(fam[0])

    def test_empty(self):
        assert modulus_of_compactness([], []) == {}


class TestCertificates:
    def test_higher_order_taylor_green(self, tg_traj):
        nu, delta, T = 1e-2, 0.1, 1.0
        cert = higher_order_certificate(tg_traj, delta)
        w0sq = 4 * np.pi**2
        lhs = nu**2 * 2 * w0sq * (math.exp(-4 * nu * delta) - math.exp(-4 * nu * T)) / (4 * nu)
        assert cert.lhs == pytest.approx(lhs, rel=1e-5)
        assert cert.rhs == pytest.approx(2 * np.pi**2 / delta, rel=1e-12)
        assert cert.passed

    def test_higher_order_zero(self):
        cert = higher_order_certificate(frozen(ScalarField(make_grid(32), np.zeros((32, 32))), count=101), 0.1)
        assert cert.passed and cert.lhs == 0.0

    def test_higher_order_random(self, random_traj):
        assert higher_order_certificate(random_traj, 0.1).passed

    def test_short_time_taylor_green(self):
        trajs = [evolve(tg_omega(64), nu, 0.5, 5e-3) for nu in (0.05, 0.02)]
        delta = 0.1
        out = short_time_certificate(trajs, 0.5, delta)
        u0sq = 2 * np.pi**2
        for tr in trajs:
            disp = u0sq * (1 - math.exp(-2 * tr.nu * delta)) ** 2
            assert out["displacement"].ratios[[t.nu for t in trajs].index(tr.nu)] * out["envelope"] == \
                pytest.approx(disp, rel=1e-6)
        assert out["passed"]

    def test_short_time_zero(self):
        z = ScalarField(make_grid(32), np.zeros((32, 32)))
        out = short_time_certificate([frozen(z, 0.1), frozen(z, 0.05)], 0.5, 0.1)
        assert out["passed"] and out["phi"] == 0.0

    def test_kolmogorov_taylor_green(self):
        nu = 0.1  # sqrt(nu) >= 4 h at n = 80
        rep = kolmogorov_equivalence_report(evolve(tg_omega(80), nu, 1.0, 1e-2), 0.1)
        ell = math.sqrt(nu)
        k = math.sqrt(2)
        decay = (1 - math.exp(-4 * nu)) / (4 * nu)
        s2_closed = 2 * 2 * np.pi**2 * (1 - 2 * j1(k * ell) / (k * ell)) * decay
        # time trapezoid with dt = 0.01: relative error ~ dt^2 (4 nu)^2 / 12 = 1.3e-6
        assert rep.constant_free.lhs == pytest.approx(s2_closed, rel=1e-5)
        assert rep.constant_free.rhs == pytest.approx(ell**2 * 4 * np.pi**2 * decay, rel=1e-5)
        assert rep.constant_free.passed

    def test_kolmogorov_zero(self):
        z = frozen(ScalarField(make_grid(128), np.zeros((128, 128))), nu=0.04)
        rep = kolmogorov_equivalence_report(z, 0.1)
        assert rep.constant_free.passed
        assert all(v == 0.0 for v in rep.values.values())

    def test_kolmogorov_under_resolved(self):
        tr = frozen(shear_omega(32), nu=1e-2)
        with pytest.warns(RuntimeWarning):
            assert kolmogorov_equivalence_report(tr, 0.1) is None

    def test_rate_envelope_monotone_and_degenerate(self):
        g = make_grid(64)
        trajs = [frozen(shear_omega(64), nu=nu) for nu in (1e-2, 10**-2.5, 1e-3)]
        res = rate_certificate(trajs, power_beta(2), 0.1)
        assert res.envelope_shape[0] > res.envelope_shape[1] > res.envelope_shape[2]
        degenerate = rate_certificate(trajs, power_beta(2), 1.0)
        assert all(v == 0.0 for v in degenerate.lhs)
        assert degenerate.passed

    def test_fit_drift(self):
        d = fit_drift("x", {1e-2: 1.0, 1e-3: 1.5})
        assert d.C_ref == 1.0 and d.drift == 1.5 and d.passed
        assert not fit_drift("x", {1e-2: 1.0, 1e-3: 2.5}).passed


class TestPairingsAndAtoms:
    def test_unit_density(self):
        g = make_grid(32)
        rec = weak_star_pairing([ScalarField(g, np.ones((32, 32)))], lambda x1, x2: 1.0)
        assert rec.values[0] == pytest.approx((2 * np.pi) ** 2, rel=1e-14)

    def test_separable_factorization(self):
        rng = np.random.default_rng(0)
        g = make_grid(32)
        a = ScalarField(g, rng.random((32, 32)))
        b = ScalarField(g, rng.random((32, 32)))
        phi = rng.random((32, 32))
        psi = rng.random((32, 32))
        # <a (x) b, phi (x) psi> summed over the product grid
        direct = np.einsum("ij,ij,kl,kl->", a.values, phi, b.values, psi) * g.cell_area**2
        assert tensor_pairing(a, b, phi, psi) == pytest.approx(direct, rel=1e-12)

    def test_aitken_limit(self):
        g = make_grid(16)
        dens = [ScalarField(g, np.full((16, 16), 1 + 0.5**k)) for k in range(1, 5)]
        rec = weak_star_pairing(dens, np.ones((16, 16)))
        assert rec.limit == pytest.approx((2 * np.pi) ** 2, rel=1e-12)

    def test_atom_uniform(self):
        g = make_grid(256)
        rec = atom_mass(ScalarField(g, np.ones((256, 256))), (1.0, 2.0), [0.8, 0.4, 0.2])
        np.testing.assert_allclose(rec.masses, np.pi * np.array(rec.radii) ** 2, rtol=0.05)
        assert rec.score == pytest.approx(np.pi * 0.04, rel=0.05)

    def test_two_bumps(self):
        g = make_grid(256)
        w = Mollifier(0.3).weights(g) / g.cell_area
        dens = np.roll(w, (64, 128), axis=(0, 1)) + np.roll(w, (192, 128), axis=(0, 1))
        rec = atom_mass(ScalarField(g, dens), (np.pi, np.pi), [0.5, 0.2, 0.1])
        assert rec.score == pytest.approx(0.0, abs=1e-12)
        rec = atom_mass(ScalarField(g, dens), (np.pi / 2, np.pi), [0.5, 0.2])
        assert rec.masses[0] == pytest.approx(1.0, rel=1e-12)


class TestTable:
    def test_csv_round_trip(self, tmp_path, random_traj):
        tab = DiagnosticTable()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = kolmogorov_equivalence_report(random_traj, 0.1, scale=3.0)
        cert = s2_certificate(random_traj, rep.ell)
        tab.add_row(1e-2, rep.ell, 0.1, {"diss_total": rep.values["diss"], "s2": rep.values["s2"]}, [cert])
        path = tab.to_csv(tmp_path / "t.csv")
        rows = DiagnosticTable.read_csv(path)
        assert rows[0]["nu"] == 1e-2
        assert rows[0]["s2"] == rep.values["s2"]
        assert rows[0]["certificates"]["s2_bound"][0] is True
        assert path.read_text().splitlines()[0].startswith("nu,ell,delta,diss_total,s2,lambda_con,omega_con,q_con")
