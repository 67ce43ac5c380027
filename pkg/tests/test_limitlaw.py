"""Limit laws: closed forms, the Burgers fixed point, densities, moments."""

import numpy as np
import pytest
from scipy.integrate import quad

from eigenflow.limitlaw import (AtomicMeasure, BurgersEvolved,
                                Semicircle, burgers_solve, density_and_cdf,
                                law_at_time, limit_at_time, limit_stieltjes,
                                moment_from_stieltjes, semicircle_stieltjes)
from eigenflow.kernels import BrownianKernel, FractionalBrownianKernel

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


class TestSemicircleStieltjes:
    def test_value_at_i(self):
        # closed form at tau=1, z=i equals i (sqrt(5)-1)/2; cross-checked
        # below against direct quadrature of the semicircle density
        assert semicircle_stieltjes(1.0, 1j) == pytest.approx(GOLDEN * 1j, abs=1e-14)

    def test_quadrature_oracle(self):
        z = 0.4 + 0.9j
        tau = 1.3
        law = Semicircle(0.0, tau)

        def integrand_re(x):
            return (law.pdf(x) / (x - z)).real

        def integrand_im(x):
            return (law.pdf(x) / (x - z)).imag

        r = 2 * np.sqrt(tau)
        re, _ = quad(integrand_re, -r, r, limit=400, epsabs=1e-12)
        im, _ = quad(integrand_im, -r, r, limit=400, epsabs=1e-12)
        assert semicircle_stieltjes(tau, z) == pytest.approx(re + 1j * im, abs=1e-8)

    def test_far_field(self):
        z = 2000j
        assert semicircle_stieltjes(1.0, z) == pytest.approx(-1 / z, rel=1e-5)

    def test_tau_zero_is_point_mass(self):
        assert semicircle_stieltjes(0.0, 1j) == pytest.approx(1j, rel=1e-15)

    def test_small_tau_limit(self):
        assert semicircle_stieltjes(1e-12, 1j) == pytest.approx(1j, rel=1e-10)

    def test_herglotz_wide_grid(self):
        res = np.linspace(-5, 5, 20)
        ims = np.linspace(0.05, 5, 20)
        for tau in (0.1, 1.0, 10.0):
            for re in res:
                for im in ims:
                    assert semicircle_stieltjes(tau, complex(re, im)).imag > 0

    def test_rejects_lower_half_plane(self):
        with pytest.raises(ValueError):
            semicircle_stieltjes(1.0, -1j)


class TestBurgersSolver:
    def test_point_mass_matches_closed_form(self):
        mu0 = AtomicMeasure.point_mass(0.0)
        for tau in (0.1, 1.0, 4.0):
            for z in (1j, 1 + 1j, -2 + 0.5j, 0.1j):
                direct = burgers_solve(mu0, tau, z)
                assert abs(direct - semicircle_stieltjes(tau, z)) <= 1e-10

    def test_translation_equivariance(self):
        for a in (-1.5, 0.7):
            mu0 = AtomicMeasure.point_mass(a)
            for tau in (0.5, 2.0):
                z = 0.3 + 0.8j
                assert abs(burgers_solve(mu0, tau, z)
                           - semicircle_stieltjes(tau, z - a)) <= 1e-10

    def test_tau_zero_returns_initial_transform(self):
        mu0 = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        z = 0.2 + 0.4j
        assert burgers_solve(mu0, 0.0, z) == mu0.stieltjes(z)

    def test_fixed_point_residual(self):
        mu0 = AtomicMeasure(np.array([-1.0, 0.3, 1.0]), np.array([0.2, 0.5, 0.3]))
        gen = np.random.default_rng(3)
        for _ in range(50):
            tau = float(gen.uniform(0.05, 5.0))
            z = complex(gen.uniform(-3, 3), gen.uniform(0.05, 3.0))
            f = burgers_solve(mu0, tau, z)
            resid = abs(f - mu0.stieltjes(z + tau * f))
            assert resid <= 1e-12 * (1.0 + abs(f))
            assert f.imag > 0
            assert (z + tau * f).imag > 0

    def test_herglotz_two_atom_grid(self):
        mu0 = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        for tau in (0.1, 1.0, 10.0):
            for re in np.linspace(-4, 4, 20):
                for im in np.linspace(0.1, 4, 20):
                    f = limit_stieltjes(mu0, tau, complex(re, im))
                    assert f.imag > 0

    def test_moments_of_evolved_point_mass(self):
        # second moment tau, fourth moment 2 tau^2
        for tau in (0.3, 1.0, 2.5):
            law = BurgersEvolved(initial=AtomicMeasure.point_mass(0.0), tau=tau)
            assert moment_from_stieltjes(law, 0) == pytest.approx(1.0, abs=1e-10)
            assert moment_from_stieltjes(law, 1) == pytest.approx(0.0, abs=1e-10)
            assert moment_from_stieltjes(law, 2) == pytest.approx(tau, abs=1e-6)
            assert moment_from_stieltjes(law, 4) == pytest.approx(2 * tau ** 2, abs=1e-5)

    def test_moments_of_two_atom_start(self):
        # free additive evolution preserves the mean and adds tau variance
        mu0 = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        tau = 0.7
        law = BurgersEvolved(initial=mu0, tau=tau)
        assert moment_from_stieltjes(law, 1) == pytest.approx(0.0, abs=1e-8)
        assert moment_from_stieltjes(law, 2) == pytest.approx(1.0 + tau, abs=1e-6)


class TestLimitAtTime:
    def test_fbm_time_one(self):
        k = FractionalBrownianKernel(0.75)
        mu0 = AtomicMeasure.point_mass(0.0)
        assert limit_at_time(k, mu0, 1.0, 1j) == pytest.approx(GOLDEN * 1j, abs=1e-12)

    def test_brownian_time_four(self):
        k = BrownianKernel()
        mu0 = AtomicMeasure.point_mass(0.0)
        got = limit_at_time(k, mu0, 4.0, 2j)
        assert got == pytest.approx(semicircle_stieltjes(4.0, 2j), abs=1e-12)

    def test_time_zero_returns_initial(self):
        k = FractionalBrownianKernel(0.3)
        mu0 = AtomicMeasure(np.array([0.0, 2.0]), np.array([0.5, 0.5]))
        z = 1j
        assert limit_at_time(k, mu0, 0.0, z) == mu0.stieltjes(z)


class TestSemicircleLaw:
    def test_density_and_cdf_center(self):
        pdf, cdf = density_and_cdf(Semicircle(0.0, 1.0), 0.0)
        assert pdf == pytest.approx(1 / np.pi, rel=1e-12)
        assert cdf == pytest.approx(0.5, abs=1e-14)

    def test_support_endpoints(self):
        law = Semicircle(0.0, 1.0)
        assert law.pdf(2.0) == 0.0
        assert law.pdf(-2.0) == 0.0
        assert law.cdf(-2.0) == 0.0
        assert law.cdf(2.0) == 1.0

    def test_mass_and_moments_closed_form(self):
        law = Semicircle(0.5, 2.0)
        mass, _ = quad(law.pdf, *law.support, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)
        m2, _ = quad(lambda x: (x - 0.5) ** 2 * law.pdf(x), *law.support, limit=200)
        assert m2 == pytest.approx(2.0, abs=1e-9)
        m4, _ = quad(lambda x: (x - 0.5) ** 4 * law.pdf(x), *law.support, limit=200)
        assert m4 == pytest.approx(2 * 2.0 ** 2, abs=1e-8)

    def test_support_matches_two_sigma(self):
        law = Semicircle(0.0, 4.0)
        assert law.support == (-4.0, 4.0)


class TestBurgersEvolvedLaw:
    def test_density_matches_semicircle(self):
        law = BurgersEvolved(initial=AtomicMeasure.point_mass(0.0), tau=1.0)
        ref = Semicircle(0.0, 1.0)
        for x in (-1.5, -0.3, 0.0, 0.9):
            assert law.pdf(x) == pytest.approx(ref.pdf(x), abs=1e-5)
        assert law.pdf(0.0) == pytest.approx(1 / np.pi, abs=1e-5)

    def test_cdf_matches_semicircle(self):
        law = BurgersEvolved(initial=AtomicMeasure.point_mass(0.0), tau=1.0)
        ref = Semicircle(0.0, 1.0)
        for x in (-1.0, 0.0, 1.3):
            assert law.cdf(x) == pytest.approx(ref.cdf(x), abs=2e-5)

    def test_mass_within_inversion_accuracy(self):
        mu0 = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        law = BurgersEvolved(initial=mu0, tau=0.5)
        lo, hi = law.support
        mass, _ = quad(law.pdf, lo, hi, limit=300)
        assert mass == pytest.approx(1.0, abs=1e-4)

    def test_tau_zero_cdf_is_step(self):
        mu0 = AtomicMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        law = BurgersEvolved(initial=mu0, tau=0.0)
        assert law.cdf(-0.5) == 0.0
        assert law.cdf(0.5) == 0.5
        assert law.cdf(1.5) == 1.0
        assert np.array_equal(law.atom_positions, mu0.atoms)

    def test_law_at_time_dispatch(self):
        k = BrownianKernel()
        assert isinstance(law_at_time(k, AtomicMeasure.point_mass(0.0), 1.0), Semicircle)
        two = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        assert isinstance(law_at_time(k, two, 1.0), BurgersEvolved)
        assert law_at_time(k, two, 0.0).tau == 0.0


class TestAtomicMeasure:
    def test_from_eigenvalues_merges_duplicates(self):
        mu = AtomicMeasure.from_eigenvalues([1.0, 1.0, -1.0, 0.0])
        assert np.array_equal(mu.atoms, [-1.0, 0.0, 1.0])
        assert np.allclose(mu.weights, [0.25, 0.25, 0.5])

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            AtomicMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.6]))

    def test_cdf(self):
        mu = AtomicMeasure(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
        assert mu.cdf(-0.1) == 0.0
        assert mu.cdf(0.0) == 0.25
        assert mu.cdf(2.0) == 1.0
